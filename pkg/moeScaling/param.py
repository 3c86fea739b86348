"""
This file contains the configuration parameters for moeScaling: published coefficients, presets, fitting grids and default tolerances.
"""

# =-=-=-=-=-=-=-=-=-=-=- Schema =-=-=-=-=-=-=-=-=-=-=-=

SCHEMA_VERSION = 1


# =-=-=-=-=-=-=-=-=-=-=- Architecture Defaults =-=-=-=-=-=-=-=-=-=-=-=

defaultNCtx = 4096
defaultNVocab = 128000

# 1 shared + 2 routed experts per token
defaultSharedExperts = 1
defaultTopK = 2
defaultActiveExperts = defaultSharedExperts + defaultTopK

sweptExpertCounts = [17, 33, 65, 129]
# (E - 3) / E rounded to four places
sweptSparsityList = [0.8235, 0.9091, 0.9538, 0.9767]
heldOutSparsity = 0.9767

# swept FLOPs ratio range
sweptRatioRange = (0.2, 1.5)
sweptMaxCompute = 1e21


# =-=-=-=-=-=-=-=-=-=-=- FLOPs Accounting =-=-=-=-=-=-=-=-=-=-=-=

peftBackwardFactor = 2
fullBackwardFactor = 3
trainingConventionList = ["combined", "additive"]
defaultTrainingConvention = "combined"


# =-=-=-=-=-=-=-=-=-=-=- Allocation Law =-=-=-=-=-=-=-=-=-=-=-=

# alpha_r = 6.7e-5 (1-S)^-1.23, beta_r = 0.24 (1-S)^0.21
sparsityLawAlphaCoef = 6.7e-5
sparsityLawAlphaExp = -1.23
sparsityLawBetaCoef = 0.24
sparsityLawBetaExp = 0.21

provenanceList = ["paper-fit", "sparsity-law", "elasticity-derived", "user"]

# numeric oracle search window and precision
oracleRatioBounds = (1e-6, 1e6)
oracleGridPoints = 121
oracleRelativeWidth = 1e-10

efficiencyFormList = ["ratio", "log1p", "expm1"]


# =-=-=-=-=-=-=-=-=-=-=- Loss Law =-=-=-=-=-=-=-=-=-=-=-=

# published estimates of the extended scaling law
publishedLossLawCoefficients = {
    "a": 15.12,
    "b": 18.62,
    "c": 39.55,
    "d": 0.0499,
    "alpha": 0.6288,
    "beta": 0.0453,
    "lambda": 0.4228,
    "gamma": 0.0431,
    "tau": 13.7354,
}

lossLawVariantList = ["final", "wang", "abnar"]
altLawVariantList = ["wang", "abnar"]
rTermModeList = ["r", "r_over_1plus_r"]
paramCountModeList = ["total", "active"]


# =-=-=-=-=-=-=-=-=-=-=- Fitting =-=-=-=-=-=-=-=-=-=-=-=

# r* selection: suboptimal point accepted when within this loss of the argmin
rStarLossTolerance = 0.001

# initial-value grid for L-BFGS
initLogWeightGrid = [0.0, 10.0, 20.0]
initExponentGrid = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25]
initLogTau = 1.5

defaultHuberDelta = 1e-3
defaultStartCount = 1024
defaultSeed = 0
optimizerMaxIter = 500
optimizerGradTol = 1e-8
minLossLawRecords = 10


# =-=-=-=-=-=-=-=-=-=-=- Planner =-=-=-=-=-=-=-=-=-=-=-=

defaultRatioTolerance = 0.05
defaultBudgetTolerance = 0.02
defaultGranularity = 64
dHiddenSpan = 2
dExpertSpan = 8

# size presets: label -> (n_layer, n_head, batch size, learning rate)
sizePresetTable = {
    "20M": (8, 8, 96, 0.0015),
    "30M": (8, 8, 160, 0.0013),
    "55M": (10, 10, 224, 0.0011),
    "100M": (14, 12, 320, 0.0009),
    "200M": (16, 16, 512, 0.0008),
}
validPresetList = list(sizePresetTable.keys())

# synthetic grid defaults, 4 values per axis
synthGridN = [1e8, 3e8, 1e9, 5e9]
synthGridD = [1e9, 1e10, 1e11, 1e12]
synthGridS = sweptSparsityList
synthGridR = [0.2, 0.6, 1.0, 1.5]
