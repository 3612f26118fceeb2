#see LICENSE.txt for license details

# IPCW metrics, each random-instance check compared with a plain double loop
import unittest
from check_basics import mkSuite, randomSimplex
import numpy as np
from survmoe import DataError, DimensionError
from survmoe.data import TimeGrid
from survmoe.metrics import (kaplanMeier, fitCensoring, ipcwWeights, brierIpcw, eceEqualMass, medianSurvivalRisk,
        concordanceHarrell, concordanceIpcw, percentileIndex, evaluatePredictions, equalMassSizes, METRIC_KEYS)

def bruteKm(times,events,at):
    out = []
    for t in at:
        s = 1.0
        for u in sorted(set(times[(events==1) & (times<=t)].tolist())):
            n = (times>=u).sum()
            d = ((times==u) & (events==1)).sum()
            s *= 1-d/float(n)
        out.append(s)
    return np.array(out)

def bruteWeight(i,t,times,events,G):
    if times[i]<=t:
        return 1/float(G(times[i])) if events[i]==1 else 0.0
    return 1/float(G(min(t,G.tau)))

def bruteBrier(F,times,events,evalTimes,G):
    out = []
    for j,t in enumerate(evalTimes):
        tot = 0.0
        for i in range(len(times)):
            y = 1.0 if times[i]<=t else 0.0
            tot += bruteWeight(i,t,times,events,G)*(F[i,j]-y)**2
        out.append(tot/len(times))
    return np.array(out)

def bruteEce(F,times,events,evalTimes,G,Q):
    N = len(times)
    per = []
    for j,t in enumerate(evalTimes):
        order = sorted(range(N),key=lambda i: (F[i,j],i))
        start, err = 0, 0.0
        for q in range(Q):
            size = N//Q+(1 if q<N%Q else 0)
            idx = order[start:start+size]
            start += size
            num = sum(bruteWeight(i,t,times,events,G) for i in idx if times[i]<=t)
            den = sum(bruteWeight(i,t,times,events,G) for i in idx)
            if den>0:
                fbar = sum(F[i,j] for i in idx)/size
                err += size/float(N)*abs(fbar-num/den)
        per.append(err)
    return float(np.mean(per))

def bruteConcordance(risks,times,events,G=None):
    num = den = 0.0
    for i in range(len(times)):
        if events[i]!=1 or (G is not None and times[i]>=G.tau): continue
        w = 1.0 if G is None else 1/float(G(times[i]))**2
        for j in range(len(times)):
            if times[j]>times[i]:
                den += w
                num += w*(1.0 if risks[i]>risks[j] else 0.5 if risks[i]==risks[j] else 0.0)
    return num/den

def censoredInstance(seed,N=60,m=8):
    rng = np.random.default_rng(seed)
    times = rng.integers(1,30,N).astype(float)+rng.uniform(0,0.5,N)
    events = (rng.uniform(size=N)<0.7).astype(int)
    pmf = np.stack([randomSimplex(rng,m) for _ in range(N)])
    grid = TimeGrid(np.linspace(0,times.max(),m+1))
    return pmf, times, events, grid

class KaplanMeierTestCase(unittest.TestCase):
    def check01Exact(self):
        S = kaplanMeier([1,2,3],[1,1,1])
        self.assertTrue(np.allclose(S([1,2,3]),(2/3.,1/3.,0),atol=1e-15))
        self.assertEqual(float(S(0.999)),1.0)
        self.assertEqual(float(S(10)),0.0)

    def check02NoEvents(self):
        self.assertTrue(np.all(kaplanMeier([1,2,5],[0,0,0])([0.5,2,7])==1.0))

    def check03Ties(self):
        S = kaplanMeier([1,1,2],[1,1,1])
        self.assertAlmostEqual(float(S(1)),1/3.,places=15)

    def check04Brute(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            times = rng.integers(1,10,40).astype(float)
            events = rng.integers(0,2,40)
            at = np.linspace(0.5,9.5,19)
            self.assertLess(np.abs(kaplanMeier(times,events)(at)-bruteKm(times,events,at)).max(),1e-12)

    def check05Errors(self):
        self.assertRaises(DataError,kaplanMeier,[],[])
        self.assertRaises(DimensionError,kaplanMeier,[1,2],[1])

class WeightsTestCase(unittest.TestCase):
    def check01Hand(self):
        times, events = np.array([1,2,3,4,5.]), np.array([1,0,1,1,1])
        w = ipcwWeights(3.5,times,events,fitCensoring(times,events))
        self.assertTrue(np.allclose(w,(1,0,4/3.,4/3.,4/3.),atol=1e-14))

    def check02Unweighted(self):
        times, events = np.array([1,2,3.]), np.array([1,0,1])
        self.assertEqual(ipcwWeights(2.5,times,events).tolist(),[1.0,0.0,1.0])

class BrierTestCase(unittest.TestCase):
    def check01Perfect(self):
        pmf, times, events, grid = censoredInstance(1)
        F = (times[:,None]<=grid.evalTimes[None,:]).astype(float)
        self.assertLess(np.abs(brierIpcw(F,times,events,grid.evalTimes,fitCensoring(times,events))).max(),1e-15)

    def check02Coin(self):
        times = np.arange(1,11.)
        b = brierIpcw(np.full((10,3),0.5),times,np.ones(10),[2,5,9])
        self.assertTrue(np.allclose(b,0.25,atol=1e-15))

    def check03Brute(self):
        for seed in range(5):
            pmf, times, events, grid = censoredInstance(seed)
            F = np.clip(np.cumsum(pmf,1),0,1)
            G = fitCensoring(times,events)
            self.assertLess(np.abs(brierIpcw(F,times,events,grid.evalTimes,G)-bruteBrier(F,times,events,grid.evalTimes,G)).max(),1e-12)

class EceTestCase(unittest.TestCase):
    def check01AllEventsPredictedNever(self):
        times = np.arange(1,21.)
        r = eceEqualMass(np.zeros((20,1)),times,np.ones(20),[25.0])
        self.assertAlmostEqual(r.ece,1.0,places=14)

    def check02Brute(self):
        for seed in range(5):
            pmf, times, events, grid = censoredInstance(seed+10,N=57)
            F = np.clip(np.cumsum(pmf,1),0,1)
            G = fitCensoring(times,events)
            got = eceEqualMass(F,times,events,grid.evalTimes,G,Q=10).ece
            self.assertLess(abs(got-bruteEce(F,times,events,grid.evalTimes,G,10)),1e-12)

    def check03NoCensoringMatchesUnweighted(self):
        pmf, times, _, grid = censoredInstance(3)
        events = np.ones(len(times),dtype=int)
        F = np.cumsum(pmf,1)
        a = eceEqualMass(F,times,events,grid.evalTimes,fitCensoring(times,events))
        b = eceEqualMass(F,times,events,grid.evalTimes,None)
        self.assertEqual(a.ece,b.ece)
        self.assertTrue(np.array_equal(a.perTime,b.perTime))

    def check04BinSizes(self):
        self.assertEqual(equalMassSizes(57,10).tolist(),[6]*7+[5]*3)
        self.assertRaises(DataError,eceEqualMass,np.zeros((5,1)),np.arange(1,6.),np.ones(5),[3.0])

    def check05Calibrated(self):
        rng = np.random.default_rng(4)
        N = 20000
        lam = rng.uniform(0.5,2.0,N)
        times = rng.exponential(1/lam)
        evalTimes = np.array([0.5,1.0,2.0])
        F = 1-np.exp(-lam[:,None]*evalTimes[None,:])
        self.assertLessEqual(eceEqualMass(F,times,np.ones(N),evalTimes).ece,0.02)

class ConcordanceTestCase(unittest.TestCase):
    def check01MedianRisk(self):
        t = [1,2,3,4]
        r = medianSurvivalRisk(np.array([[0.25]*4,[0.1,0.2,0.4,0.3],[1,0,0,0]]),t)
        self.assertTrue(np.allclose(r,(-2,-2.5,-1),atol=1e-14))

    def check02Perfect(self):
        times = np.arange(1,11.)
        self.assertEqual(concordanceHarrell(-times,times,np.ones(10)),1.0)
        self.assertEqual(concordanceHarrell(times,times,np.ones(10)),0.0)

    def check03Hand(self):
        self.assertAlmostEqual(concordanceHarrell([4,3,1,2],[1,2,3,4],[1,1,1,1]),5/6.,places=15)

    def check04Random(self):
        rng = np.random.default_rng(5)
        c = concordanceHarrell(rng.normal(size=2000),rng.exponential(size=2000),rng.integers(0,2,2000))
        self.assertAlmostEqual(c,0.5,delta=0.05)

    def check05MonotoneInvariance(self):
        rng = np.random.default_rng(6)
        r, t, e = rng.normal(size=100), rng.exponential(size=100), rng.integers(0,2,100)
        self.assertEqual(concordanceHarrell(r,t,e),concordanceHarrell(np.exp(r),t,e))

    def check06Brute(self):
        for seed in range(5):
            pmf, times, events, grid = censoredInstance(seed+20)
            risks = np.round(np.random.default_rng(seed).normal(size=len(times)),1)
            G = fitCensoring(times,events)
            self.assertAlmostEqual(concordanceHarrell(risks,times,events),bruteConcordance(risks,times,events),places=12)
            self.assertAlmostEqual(concordanceIpcw(risks,times,events,G),bruteConcordance(risks,times,events,G),places=12)

    def check07NoCensoringAgrees(self):
        rng = np.random.default_rng(7)
        r, t = rng.normal(size=80), rng.exponential(size=80)
        e = np.ones(80,dtype=int)
        self.assertEqual(concordanceHarrell(r,t,e),concordanceIpcw(r,t,e,fitCensoring(t,e)))

    def check08NoComparablePairs(self):
        self.assertRaises(DataError,concordanceHarrell,[1,2,3],[1,2,3],[0,0,0])

class EvaluateTestCase(unittest.TestCase):
    def check01Keys(self):
        pmf, times, events, grid = censoredInstance(30,N=80,m=10)
        out = evaluatePredictions(pmf,times,events,grid,fitCensoring(times,events))
        self.assertEqual(set(out),set(METRIC_KEYS))
        self.assertEqual(len(out['brier_per_time']),10)
        self.assertEqual(out['n_records'],80)

    def check02PercentileIndex(self):
        self.assertEqual([percentileIndex(q,100) for q in (25,50,75)],[25,50,74])

    def check03WrongBins(self):
        pmf, times, events, grid = censoredInstance(31,m=8)
        self.assertRaises(DataError,evaluatePredictions,pmf,times,events,TimeGrid(np.linspace(0,10,6)))

def makeSuite():
    return unittest.TestSuite((
                mkSuite(KaplanMeierTestCase,'check'),
                mkSuite(WeightsTestCase,'check'),
                mkSuite(BrierTestCase,'check'),
                mkSuite(EceTestCase,'check'),
                mkSuite(ConcordanceTestCase,'check'),
                mkSuite(EvaluateTestCase,'check'),
                ))

if __name__=='__main__':
    runner = unittest.TextTestRunner()
    runner.run(makeSuite())
