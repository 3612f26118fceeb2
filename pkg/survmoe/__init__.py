#see LICENSE.txt for license details

"""survmoe - discrete-time survival analysis with mixture-of-experts heads.

Three mixture-of-experts prediction heads (Fixed, Adjustable and Personalized)
sit on a feedforward backbone and are trained with an MTLR style likelihood.
Predictions are scored with inverse probability of censoring weighted (IPCW)
calibration, Brier and concordance metrics, and the routers can be inspected as
patient clusterings.

The library is split by concern:

    survmoe.data      datasets, CSV ingestion, standardization, time grids,
                      the synthetic log-normal survival generator
    survmoe.mtlr      increment-logit <-> PMF bijection and the likelihoods
    survmoe.heads     routers, the two-logistic warp and the MoE heads
    survmoe.training  backbone, gradients, Adam, early stopping, grad checks
    survmoe.metrics   Kaplan-Meier, IPCW Brier/ECE, Harrell and Uno C
    survmoe.clusters  Top-1 routing, routing matrices, Haberman residuals, ARI
    survmoe.cli       the batch command line front end

Set the environment variable SURVMOE_verbose to a positive integer to get
progress output.
"""
VERSION = '1.0.0'
__version__ = VERSION

import os, sys
from hashlib import md5

_verbose = int(os.environ.get('SURVMOE_verbose','0') or 0)

class SurvMoeError(ValueError):
    pass

class DataError(SurvMoeError):
    '''bad input data, message names the row where possible'''

class ConfigError(SurvMoeError):
    pass

class DimensionError(SurvMoeError):
    pass

class NumericalError(SurvMoeError):
    '''non-finite loss or gradient'''

class UsageError(SurvMoeError):
    pass

def asUtf8(s):
    return s if isinstance(s,bytes) else str(s).encode('utf8')

def getMd5(*parts):
    h = md5()
    for p in parts:
        h.update(asUtf8(p) if not hasattr(p,'tobytes') else p.tobytes())
    return h.hexdigest()

def isVerbose(verbose=None,level=1):
    v = _verbose if verbose is None else verbose
    return int(v or 0)>=level

def pnl(s):
    '''print without a lineend'''
    sys.stdout.write(s)

def pel(s=''):
    '''print with a line ending'''
    pnl(s)
    pnl('\n')

def vpel(s,verbose=None,level=1):
    if isVerbose(verbose,level):
        pel(s)
