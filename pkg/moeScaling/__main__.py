import sys

from moeScaling.planner.cli import main

sys.exit(main())
