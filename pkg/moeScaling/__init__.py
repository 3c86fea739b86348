from moeScaling import flops, alloc, scaling, fit, planner
