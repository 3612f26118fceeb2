#see LICENSE.txt for license details

import os, math, unittest, tempfile, warnings
from check_basics import mkSuite
import numpy as np
from scipy import stats
from survmoe import DataError, ConfigError
from survmoe.data import (FeatureSchema, Dataset, TimeGrid, SyntheticSpec, loadCsv, readSchema, writeSchema,
        writeCsv, loadLabels, writeLabels, fitStandardizer, applyStandardizer, makeTimeGrid, discretize,
        split, lognormalParams, generateSynthetic, fingerprint, defaultEmbeddingDim, MISSING)

def _write(path,text):
    with open(path,'w') as f:
        f.write(text)

def _bytes(path):
    with open(path,'rb') as f:
        return f.read()

def smallDataset(N=20,seed=0):
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(continuous=['a','b'])
    return Dataset(rng.normal(size=(N,2)),None,rng.uniform(0.5,8,N),rng.integers(0,2,N),schema)

class SyntheticTestCase(unittest.TestCase):
    def check01LognormalMoments(self):
        for m,s in ((1,1),(9,3),(37,1),(5,2)):
            mu, sigma = lognormalParams(m,s)
            d = stats.lognorm(s=sigma,scale=math.exp(mu))
            self.assertAlmostEqual(d.mean(),m,places=9)
            self.assertAlmostEqual(d.std(),s,places=9)

    def check02LognormalLimits(self):
        mu, sigma = lognormalParams(4,1e-6)
        self.assertAlmostEqual(mu,math.log(4),places=9)
        self.assertLess(sigma,1e-6)
        self.assertRaises(ConfigError,lognormalParams,0,1)
        self.assertRaises(ConfigError,lognormalParams,3,-1)

    def check03DefaultShape(self):
        ds = generateSynthetic(SyntheticSpec())
        self.assertEqual(len(ds),6250)
        self.assertEqual(ds.continuous.shape,(6250,16))
        self.assertEqual(int((ds.event==0).sum()),937)
        self.assertEqual(sorted(set(ds.labels.tolist())),list(range(10)))
        cen = ds.event==0
        self.assertTrue(bool((ds.time[cen]<ds.latentTimes[cen]).all()))
        self.assertTrue(np.array_equal(ds.time[~cen],ds.latentTimes[~cen]))
        self.assertTrue(bool((ds.time>0).all()))

    def check04CentersOnSphere(self):
        spec = SyntheticSpec()
        ds = generateSynthetic(spec)
        for k in range(10):
            centre = ds.continuous[ds.labels==k].mean(0)
            self.assertAlmostEqual(float(np.linalg.norm(centre)),spec.radius,delta=0.15)

    def check05NoCensoring(self):
        ds = generateSynthetic(SyntheticSpec(censorRate=0.0,samplesPerClass=20))
        self.assertTrue(bool((ds.event==1).all()))

    def check06Deterministic(self):
        spec = SyntheticSpec(samplesPerClass=30,seed=11)
        a, b = generateSynthetic(spec), generateSynthetic(spec)
        self.assertEqual(fingerprint(a),fingerprint(b))
        with tempfile.TemporaryDirectory() as d:
            writeCsv(a,os.path.join(d,'a.csv'))
            writeCsv(b,os.path.join(d,'b.csv'))
            self.assertEqual(_bytes(os.path.join(d,'a.csv')),_bytes(os.path.join(d,'b.csv')))
        self.assertNotEqual(fingerprint(a),fingerprint(generateSynthetic(SyntheticSpec(samplesPerClass=30,seed=12))))

    def check07BadSpec(self):
        self.assertRaises(ConfigError,SyntheticSpec,censorRate=1.0)
        self.assertRaises(ConfigError,SyntheticSpec,classMeans=(1,2),classStds=(1,))

    def check08LargeSampleClassMoments(self):
        spec = SyntheticSpec(censorRate=0.0,samplesPerClass=100000,featureDim=1)
        ds = generateSynthetic(spec)
        self.assertTrue(np.array_equal(ds.time,ds.latentTimes))
        for k,(m,s) in enumerate(zip(spec.classMeans,spec.classStds)):
            t = ds.time[ds.labels==k]
            self.assertEqual(t.size,100000)
            self.assertAlmostEqual(t.mean()/m,1.0,delta=0.02,msg='class %d mean' % k)
            self.assertAlmostEqual(t.std()/s,1.0,delta=0.05,msg='class %d std' % k)

class SplitTestCase(unittest.TestCase):
    def check01Sizes(self):
        ds = generateSynthetic(SyntheticSpec())
        parts = split(ds,(0.8,0.1,0.1),seed=0)
        self.assertEqual([len(p) for p in parts],[5000,625,625])
        ids = np.concatenate([p.ids for p in parts])
        self.assertEqual(len(set(ids.tolist())),6250)

    def check02Deterministic(self):
        ds = smallDataset(50)
        a, b = split(ds,seed=3), split(ds,seed=3)
        for x,y in zip(a,b):
            self.assertTrue(np.array_equal(x.ids,y.ids))
        self.assertFalse(np.array_equal(a[0].ids,split(ds,seed=4)[0].ids))

    def check03EmptySplit(self):
        self.assertRaises(DataError,split,smallDataset(4),(0.8,0.1,0.1))
        self.assertRaises(ConfigError,split,smallDataset(10),(0.5,0.2,0.2))

class GridTestCase(unittest.TestCase):
    def check01Edges(self):
        ds = Dataset(None,None,[1.0,8.0,3.0],[1,1,0],FeatureSchema())
        g = makeTimeGrid(ds,4)
        self.assertTrue(np.allclose(g.edges,(0,2,4,6,8)))
        self.assertEqual(g.m,4)
        self.assertTrue(np.allclose(g.evalTimes,(2,4,6,8)))
        self.assertTrue(np.allclose(g.canonicalPoints,(0,1/3.,2/3.,1)))

    def check02BinIndex(self):
        g = TimeGrid([0,2,4,6,8])
        self.assertEqual(g.binIndex([0.5,2.0,3.9,8.0,100.0]).tolist(),[0,1,1,3,3])

    def check03Discretize(self):
        ds = Dataset(None,None,[1.0,5.0],[1,0],FeatureSchema())
        t = discretize(ds,TimeGrid([0,2,4,6,8]))
        self.assertEqual(t.binIndex.tolist(),[0,2])
        self.assertEqual(t.labels.tolist(),[[1,1,1,1],[0,0,1,1]])

    def check04BadGrid(self):
        self.assertRaises(ConfigError,TimeGrid,[0,1])
        self.assertRaises(ConfigError,TimeGrid,[0,2,1])
        self.assertRaises(ConfigError,makeTimeGrid,smallDataset(),1)

    def check05BinIndexMatchesScan(self):
        rng = np.random.default_rng(5)
        times = np.concatenate((rng.uniform(0.01,20.0,500),[20.0]))
        g = makeTimeGrid(Dataset(None,None,times,np.ones(times.size,dtype=int),FeatureSchema()),100)
        self.assertEqual(g.binIndex([10.0]).tolist(),[50])
        query = np.concatenate((times,g.edges[1:],np.nextafter(g.edges[1:],0),[60.0]))
        t = discretize(Dataset(None,None,query,np.ones(query.size,dtype=int),FeatureSchema()),g)
        for i,q in enumerate(query):
            j = min(max(k for k in range(101) if g.edges[k]<=q),99)
            self.assertEqual(t.binIndex[i],j,q)
            self.assertEqual(t.labels[i].tolist(),[int(k>=j) for k in range(100)])

class StandardizeTestCase(unittest.TestCase):
    def check01TrainMoments(self):
        ds = smallDataset(200,seed=1)
        s = fitStandardizer(ds)
        x = applyStandardizer(s,ds).continuous
        self.assertTrue(np.allclose(x.mean(0),0,atol=1e-12))
        self.assertTrue(np.allclose(x.std(0),1,atol=1e-12))

    def check02ConstantAndMissing(self):
        c = np.array([[1.0,2.0],[1.0,np.nan],[1.0,4.0]])
        ds = Dataset(c,None,[1,2,3],[1,1,1],FeatureSchema(continuous=['a','b']))
        s = fitStandardizer(ds)
        self.assertEqual(s.stds[0],1.0)
        x = applyStandardizer(s,ds).continuous
        self.assertTrue(np.all(x[:,0]==0))
        self.assertEqual(x[1,1],0.0)

    def check03Idempotent(self):
        ds = smallDataset(100,seed=2)
        once = applyStandardizer(fitStandardizer(ds),ds)
        twice = applyStandardizer(fitStandardizer(once),once)
        self.assertLess(np.abs(once.continuous-twice.continuous).max(),1e-12)

    def check04Unfitted(self):
        ds = smallDataset()
        self.assertRaises(ConfigError,applyStandardizer,ds.schema,ds)

class CsvTestCase(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.schema = FeatureSchema(continuous=['age'],categorical=['sex'],time='t',event='e')

    def tearDown(self):
        self.dir.cleanup()

    def path(self,name,text=None):
        p = os.path.join(self.dir.name,name)
        if text is not None: _write(p,text)
        return p

    def check01Load(self):
        ds = loadCsv(self.path('a.csv','age,sex,t,e\n50,m,3.5,1\nNA,f,2,0\n61,,1.25,1\n'),self.schema)
        self.assertEqual(len(ds),3)
        self.assertEqual(ds.schema.levels['sex'],[MISSING,'f','m'])
        self.assertEqual(ds.categorical[:,0].tolist(),[2,1,0])
        self.assertTrue(np.isnan(ds.continuous[1,0]))
        self.assertEqual(ds.event.tolist(),[1,0,1])
        self.assertEqual(ds.schema.cardinalities,[3])

    def check02UnknownLevel(self):
        schema = self.schema.replace(levels={'sex':['f','m']})
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter('always')
            ds = loadCsv(self.path('b.csv','age,sex,t,e\n50,x,3.5,1\n40,f,1,1\n'),schema)
        self.assertEqual(ds.categorical[:,0].tolist(),[0,1])
        self.assertEqual(ds.unknownLevels,{'sex':1})
        self.assertTrue(any('unknown level' in str(_.message) for _ in w))

    def check03BadRows(self):
        with self.assertRaises(DataError) as cm:
            loadCsv(self.path('c.csv','age,sex,t,e\n50,m,3.5,1\n50,m,3.5,2\n'),self.schema)
        self.assertIn('row 2',str(cm.exception))
        with self.assertRaises(DataError) as cm:
            loadCsv(self.path('d.csv','age,sex,t,e\n50,m,-1,1\n'),self.schema)
        self.assertIn('row 1',str(cm.exception))
        self.assertRaises(DataError,loadCsv,self.path('e.csv','age,sex,t,e\nold,m,1,1\n'),self.schema)

    def check04MissingColumn(self):
        with self.assertRaises(DataError) as cm:
            loadCsv(self.path('f.csv','age,t,e\n1,1,1\n'),self.schema)
        self.assertIn('sex',str(cm.exception))

    def check05Schema(self):
        s = readSchema(self.path('s.json','{"continuous": ["age"], "categorical": {"sex": ["f", "m"]}, "time": "t", "event": "e"}'))
        self.assertEqual(s.levels['sex'],[MISSING,'f','m'])
        writeSchema(s,self.path('s2.json'))
        self.assertEqual(readSchema(self.path('s2.json')),s)
        self.assertRaises(ConfigError,readSchema,self.path('bad.json','{"continuous": []}'))
        self.assertRaises(ConfigError,readSchema,self.path('bad2.json','{"time": "t", "event": "e", "weight": 1}'))

    def check06Labels(self):
        ds = generateSynthetic(SyntheticSpec(samplesPerClass=5,classMeans=(1,5),classStds=(1,1)))
        writeLabels(ds,self.path('labels.csv'))
        writeCsv(ds,self.path('data.csv'))
        back = loadLabels(self.path('labels.csv'),loadCsv(self.path('data.csv'),ds.schema))
        self.assertTrue(np.array_equal(back.labels,ds.labels))
        self.assertTrue(np.array_equal(back.time,ds.time))

class DatasetTestCase(unittest.TestCase):
    def check01Frozen(self):
        ds = smallDataset()
        with self.assertRaises(ValueError):
            ds.time[0] = 1.0

    def check02Records(self):
        r = next(smallDataset().records())
        self.assertEqual(r._fields,('continuous','categorical','time','event'))

    def check03Validation(self):
        schema = FeatureSchema(continuous=['a'])
        self.assertRaises(DataError,Dataset,[[1.0]],None,[0.0],[1],schema)
        self.assertRaises(DataError,Dataset,[[1.0],[2.0]],None,[1.0],[1],schema)

    def check04Fingerprint(self):
        ds = smallDataset()
        n, md5 = fingerprint(ds)
        self.assertEqual(n,20)
        x = ds.continuous.copy()
        x[0,0] += 1
        self.assertNotEqual(md5,fingerprint(ds.withContinuous(x))[1])

    def check05EmbeddingDims(self):
        self.assertEqual(defaultEmbeddingDim(3),2)
        self.assertEqual(defaultEmbeddingDim(100),16)
        s = FeatureSchema(categorical=['c'],levels={'c':['a','b']},embeddingDims={'c':5})
        self.assertEqual(s.embeddingDim('c'),5)

def makeSuite():
    return unittest.TestSuite((
                mkSuite(SyntheticTestCase,'check'),
                mkSuite(SplitTestCase,'check'),
                mkSuite(GridTestCase,'check'),
                mkSuite(StandardizeTestCase,'check'),
                mkSuite(CsvTestCase,'check'),
                mkSuite(DatasetTestCase,'check'),
                ))

if __name__=='__main__':
    runner = unittest.TextTestRunner()
    runner.run(makeSuite())
