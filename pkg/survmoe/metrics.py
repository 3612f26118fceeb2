#see LICENSE.txt for license details

"""IPCW evaluation of predicted event distributions.

Predictions come in as an N x m PMF matrix on a TimeGrid; metrics are taken at
the right bin edges.  G is the Kaplan-Meier survival function of the censoring
process on the evaluation split; passing G=None means G = 1 everywhere, which
turns every weighted metric into its unweighted counterpart.
"""
import math
from collections import namedtuple
import numpy as np
from lifelines import KaplanMeierFitter
from . import DataError, DimensionError
from .mtlr import survivalCurve

WEIGHT_FLOOR = 1e-8
PERCENTILES = (25,50,75)
METRIC_KEYS = ('ece','ece_per_time','brier_25','brier_50','brier_75','brier_mean',
        'brier_per_time','c_harrell','c_ipcw','n_records','censored_fraction')
_CHUNK = 512

EceReport = namedtuple('EceReport','ece perTime meanPrediction observedRate binSizes Q')

class StepFunction:
    '''right-continuous non-increasing step function, 1 before the first jump
    and held at its last value beyond tau'''
    def __init__(self,times,values):
        self.times = np.asarray(times,dtype=float)
        self.values = np.asarray(values,dtype=float)
        self._lookup = np.concatenate(([1.0],self.values))

    @property
    def tau(self):
        return float(self.times[-1]) if self.times.size else math.inf

    def __call__(self,t):
        t = np.minimum(np.asarray(t,dtype=float),self.tau)
        return self._lookup[np.searchsorted(self.times,t,side='right')]

class CensoringSurvival(StepFunction):
    pass

def kaplanMeier(times,indicators,cls=StepFunction):
    '''product-limit estimate; indicators mark the records whose event is counted'''
    times = np.asarray(times,dtype=float)
    indicators = np.asarray(indicators)
    if times.size==0:
        raise DataError('Kaplan-Meier needs at least one record')
    if times.shape!=indicators.shape:
        raise DimensionError('%d times but %d indicators' % (times.size,indicators.size))
    kmf = KaplanMeierFitter().fit(times,event_observed=indicators)
    sf = kmf.survival_function_
    t = sf.index.values.astype(float)
    keep = t>0
    return cls(t[keep],sf.iloc[:,0].values[keep])

def fitCensoring(times,events):
    '''G, the survival function of the censoring times'''
    return kaplanMeier(times,1-np.asarray(events),cls=CensoringSurvival)

def _G(G,t):
    return np.ones(np.shape(t)) if G is None else G(t)

def _tauOf(G,times):
    return float(np.max(times)) if G is None else G.tau

def ipcwWeights(t,times,events,G=None):
    '''w_i(t) for every record: observed events up to t weighted by 1/G(T_i), survivors by 1/G(t)'''
    times = np.asarray(times,dtype=float)
    events = np.asarray(events)
    tau = _tauOf(G,times)
    evt = (times<=t) & (events==1)
    return (evt/np.maximum(_G(G,np.minimum(times,tau)),WEIGHT_FLOOR)
            +(times>t)/max(float(_G(G,min(t,tau))),WEIGHT_FLOOR))

def predictedCdf(pmf):
    return np.clip(1-survivalCurve(pmf),0.0,1.0)

def _checkShapes(F,times,evalTimes):
    if F.shape!=(len(times),len(evalTimes)):
        raise DimensionError('prediction matrix is %r, expected (%d, %d)' % (F.shape,len(times),len(evalTimes)))

def brierIpcw(F,times,events,evalTimes,G=None):
    '''IPCW Brier score at every evaluation time'''
    F = np.asarray(F,dtype=float)
    times = np.asarray(times,dtype=float)
    _checkShapes(F,times,evalTimes)
    out = np.empty(len(evalTimes))
    for j,t in enumerate(evalTimes):
        y = (times<=t).astype(float)
        out[j] = np.mean(ipcwWeights(t,times,events,G)*(F[:,j]-y)**2)
    return out

def equalMassSizes(N,Q):
    b, r = divmod(N,Q)
    return np.array([b+1]*r+[b]*(Q-r),dtype=np.int64)

def eceEqualMass(F,times,events,evalTimes,G=None,Q=10):
    '''equal-mass binned calibration error with IPCW observed rates'''
    F = np.asarray(F,dtype=float)
    times = np.asarray(times,dtype=float)
    events = np.asarray(events)
    _checkShapes(F,times,evalTimes)
    N = len(times)
    if N<Q:
        raise DataError('equal-mass ECE needs at least Q=%d records, got %d' % (Q,N))
    sizes = equalMassSizes(N,Q)
    bounds = np.concatenate(([0],np.cumsum(sizes)))
    tau = _tauOf(G,times)
    wEvt = 1/np.maximum(_G(G,np.minimum(times,tau)),WEIGHT_FLOOR)
    T = len(evalTimes)
    fbar = np.zeros((T,Q))
    ybar = np.zeros((T,Q))
    perTime = np.zeros(T)
    for j,t in enumerate(evalTimes):
        wSurv = 1/max(float(_G(G,min(t,tau))),WEIGHT_FLOOR)
        E = ((times<=t) & (events==1))*wEvt
        S = (times>t)*wSurv
        order = np.argsort(F[:,j],kind='stable')
        for q in range(Q):
            idx = order[bounds[q]:bounds[q+1]]
            num = E[idx].sum()
            den = num+S[idx].sum()
            fbar[j,q] = F[idx,j].mean()
            if den>0:
                ybar[j,q] = num/den
                perTime[j] += sizes[q]/N*abs(fbar[j,q]-ybar[j,q])
    return EceReport(float(perTime.mean()),perTime,fbar,ybar,sizes,Q)

def medianSurvivalRisk(pmf,evalTimes):
    '''negated median survival time, linearly interpolated on the survival curve'''
    S = survivalCurve(np.atleast_2d(pmf))
    t = np.asarray(evalTimes,dtype=float)
    below = S<=0.5
    j = np.argmax(below,axis=1)
    prev = np.maximum(j-1,0)
    rows = np.arange(S.shape[0])
    s0, s1 = S[rows,prev], S[rows,j]
    with np.errstate(divide='ignore',invalid='ignore'):
        frac = np.where(s0>s1,(s0-0.5)/(s0-s1),0.0)
    median = t[prev]+frac*(t[j]-t[prev])
    median = np.where(j==0,t[0],median)
    median = np.where(below.any(axis=1),median,t[-1])
    return -median

def _concordance(risks,times,events,weights,tau):
    risks = np.asarray(risks,dtype=float)
    times = np.asarray(times,dtype=float)
    events = np.asarray(events)
    if not (risks.shape==times.shape==events.shape):
        raise DimensionError('risks, times and events must have equal lengths')
    anchors = np.flatnonzero((events==1) & (times<tau))
    num = den = 0.0
    for s in range(0,anchors.size,_CHUNK):
        i = anchors[s:s+_CHUNK]
        comp = times[None,:]>times[i,None]
        ri = risks[i,None]
        conc = comp*((ri>risks[None,:])+0.5*(ri==risks[None,:]))
        w = weights[i]
        num += float((w*conc.sum(1)).sum())
        den += float((w*comp.sum(1)).sum())
    if den==0:
        raise DataError('concordance is undefined without comparable pairs')
    return num/den

def concordanceHarrell(risks,times,events):
    times = np.asarray(times,dtype=float)
    #anchors at the largest time have no later subject
    return _concordance(risks,times,events,np.ones(len(times)),times.max() if times.size else math.inf)

def concordanceIpcw(risks,times,events,G=None):
    '''Uno's truncated estimator: anchors weighted by G(T_i)^-2, T_i < tau_G'''
    times = np.asarray(times,dtype=float)
    g = np.maximum(_G(G,np.minimum(times,_tauOf(G,times))),WEIGHT_FLOOR)
    return _concordance(risks,times,events,1/(g*g),_tauOf(G,times) if times.size else math.inf)

def percentileIndex(q,T):
    return int(math.floor(q/100.0*(T-1)+0.5))

def evaluatePredictions(pmf,times,events,grid,G=None,percentiles=PERCENTILES,Q=10):
    '''the headline metrics of a prediction matrix, keyed as METRIC_KEYS'''
    pmf = np.asarray(pmf,dtype=float)
    times = np.asarray(times,dtype=float)
    events = np.asarray(events)
    evalTimes = grid.evalTimes
    if pmf.shape[1:]!=(grid.m,):
        raise DataError('predictions have %d bins but the time grid has %d' % (pmf.shape[-1],grid.m))
    F = predictedCdf(pmf)
    ece = eceEqualMass(F,times,events,evalTimes,G,Q)
    brier = brierIpcw(F,times,events,evalTimes,G)
    risks = medianSurvivalRisk(pmf,evalTimes)
    out = dict(ece=ece.ece,ece_per_time=ece.perTime.tolist())
    for q in percentiles:
        out['brier_%d' % q] = float(brier[percentileIndex(q,len(evalTimes))])
    out.update(
            brier_mean=float(brier.mean()),
            brier_per_time=brier.tolist(),
            c_harrell=concordanceHarrell(risks,times,events),
            c_ipcw=concordanceIpcw(risks,times,events,G),
            n_records=int(len(times)),
            censored_fraction=float(1-events.mean()),
            )
    return out
