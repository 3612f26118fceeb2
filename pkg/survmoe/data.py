#see LICENSE.txt for license details

"""Dataset representation, CSV ingestion, standardization, time grids and the
synthetic log-normal survival generator.

A Dataset is columnar: continuous features (N x dc, float, NaN = missing before
standardization), categorical level indices (N x dk, level 0 is always the
explicit "missing" level), observed times and event flags.  Datasets are
immutable; every transformation returns a new one.
"""
import json, math, warnings
from collections import namedtuple
import numpy as np
import pandas as pd
from sklearn.preprocessing import StandardScaler
from . import DataError, ConfigError, getMd5

MISSING = 'missing'
#per-class event-time mean and std
CLASS_MEANS = (1.,5.,9.,13.,17.,21.,25.,29.,33.,37.)
CLASS_STDS = (1.,2.,3.,1.,2.,3.,1.,1.,1.,1.)
_NA_STRINGS = ('','na','nan','none','null','?')

SurvivalRecord = namedtuple('SurvivalRecord','continuous categorical time event')
EncodedTargets = namedtuple('EncodedTargets','binIndex labels event')

def defaultEmbeddingDim(cardinality):
    return max(1,min(16,int(math.ceil(cardinality/2.0))))

class FeatureSchema:
    '''column roles, categorical levels and (once fitted) standardization statistics'''
    def __init__(self,continuous=(),categorical=(),levels=None,time='time',event='event',
            label=None,id=None,means=None,stds=None,embeddingDims=None):
        self.continuous = list(continuous)
        self.categorical = list(categorical)
        self.levels = {}
        for k,v in (levels or {}).items():
            v = [str(_) for _ in v]
            if MISSING in v: v.remove(MISSING)
            self.levels[k] = [MISSING]+v
        self.time = time
        self.event = event
        self.label = label
        self.id = id
        self.means = None if means is None else np.asarray(means,dtype=float)
        self.stds = None if stds is None else np.asarray(stds,dtype=float)
        self.embeddingDims = dict(embeddingDims or {})

    @property
    def fitted(self):
        return self.means is not None

    @property
    def cardinalities(self):
        try:
            return [len(self.levels[n]) for n in self.categorical]
        except KeyError as e:
            raise ConfigError('levels of categorical column %s are not known yet' % e)

    def embeddingDim(self,name):
        if name in self.embeddingDims:
            return int(self.embeddingDims[name])
        return defaultEmbeddingDim(len(self.levels[name]))

    def replace(self,**kwds):
        d = self.toDict()
        d.update(kwds)
        return self.fromDict(d)

    def toDict(self):
        return dict(
                continuous=list(self.continuous),
                categorical=list(self.categorical),
                levels={k:list(v) for k,v in self.levels.items()},
                time=self.time, event=self.event, label=self.label, id=self.id,
                means=None if self.means is None else [float(_) for _ in self.means],
                stds=None if self.stds is None else [float(_) for _ in self.stds],
                embeddingDims={k:int(v) for k,v in self.embeddingDims.items()},
                )

    @classmethod
    def fromDict(cls,d):
        return cls(**d)

    def __eq__(self,other):
        return isinstance(other,FeatureSchema) and self.toDict()==other.toDict()

    def __repr__(self):
        return 'FeatureSchema(continuous=%r, categorical=%r)' % (self.continuous,self.categorical)

def readSchema(path):
    '''read a JSON schema declaration naming column roles'''
    try:
        with open(path,'r') as f:
            d = json.load(f)
    except (OSError,ValueError) as e:
        raise ConfigError('cannot read schema %s: %s' % (path,e))
    if not isinstance(d,dict):
        raise ConfigError('schema %s must be a JSON object' % path)
    for k in ('time','event'):
        if k not in d:
            raise ConfigError('schema %s lacks the %r key' % (path,k))
    unknown = set(d)-set('continuous categorical time event label id embedding_dims'.split())
    if unknown:
        raise ConfigError('schema %s has unknown keys %s' % (path,', '.join(sorted(unknown))))
    cat = d.get('categorical',[])
    if isinstance(cat,dict):
        levels = {k:v for k,v in cat.items() if v}
        cat = list(cat.keys())
    else:
        levels = {}
    return FeatureSchema(continuous=d.get('continuous',[]),categorical=cat,levels=levels,
            time=d['time'],event=d['event'],label=d.get('label'),id=d.get('id'),
            embeddingDims=d.get('embedding_dims'))

def writeSchema(schema,path):
    d = dict(continuous=schema.continuous,
            categorical={n:schema.levels.get(n,[])[1:] for n in schema.categorical},
            time=schema.time,event=schema.event)
    if schema.label: d['label'] = schema.label
    if schema.id: d['id'] = schema.id
    if schema.embeddingDims: d['embedding_dims'] = schema.embeddingDims
    with open(path,'w') as f:
        json.dump(d,f,indent=2,sort_keys=True)
        f.write('\n')

def _frozen(a,dtype,rows=None):
    a = np.array(a,dtype=dtype,copy=True)
    if rows is not None and a.ndim!=2:
        a = a.reshape(rows,-1) if a.size else a.reshape(rows,0)
    a.flags.writeable = False
    return a

class Dataset:
    def __init__(self,continuous,categorical,time,event,schema,labels=None,ids=None,latentTimes=None):
        time = _frozen(time,float).reshape(-1)
        N = time.shape[0]
        if continuous is None: continuous = np.zeros((N,0))
        if categorical is None: categorical = np.zeros((N,0),dtype=np.int64)
        self.continuous = _frozen(continuous,float,N)
        self.categorical = _frozen(categorical,np.int64,N)
        self.time = time
        self.event = _frozen(event,np.int64).reshape(-1)
        self.schema = schema
        self.labels = None if labels is None else _frozen(labels,np.int64).reshape(-1)
        self.ids = _frozen(np.arange(N) if ids is None else ids,np.int64).reshape(-1)
        self.latentTimes = None if latentTimes is None else _frozen(latentTimes,float).reshape(-1)
        self.unknownLevels = {}
        self._validate()

    def _validate(self):
        N = len(self)
        for name,a in (('event',self.event),('ids',self.ids)):
            if a.shape[0]!=N: raise DataError('%s has %d rows, expected %d' % (name,a.shape[0],N))
        if self.continuous.shape!=(N,len(self.schema.continuous)):
            raise DataError('continuous block has shape %r, schema declares %d columns' % (self.continuous.shape,len(self.schema.continuous)))
        if self.categorical.shape!=(N,len(self.schema.categorical)):
            raise DataError('categorical block has shape %r, schema declares %d columns' % (self.categorical.shape,len(self.schema.categorical)))
        bad = np.flatnonzero(~(np.isfinite(self.time) & (self.time>0)))
        if bad.size:
            raise DataError('row %d: time must be a positive finite number, got %r' % (bad[0]+1,self.time[bad[0]]))
        bad = np.flatnonzero((self.event!=0) & (self.event!=1))
        if bad.size:
            raise DataError('row %d: event must be 0 or 1, got %r' % (bad[0]+1,self.event[bad[0]]))
        if self.categorical.shape[1]:
            card = np.asarray(self.schema.cardinalities)
            bad = np.argwhere((self.categorical<0) | (self.categorical>=card[None,:]))
            if bad.size:
                r,c = bad[0]
                raise DataError('row %d: level index %d out of range for %s' % (r+1,self.categorical[r,c],self.schema.categorical[c]))
        if self.labels is not None and self.labels.shape[0]!=N:
            raise DataError('labels have %d rows, expected %d' % (self.labels.shape[0],N))

    def __len__(self):
        return self.time.shape[0]

    @property
    def censoredFraction(self):
        return float(1-self.event.mean()) if len(self) else 0.0

    def records(self):
        for i in range(len(self)):
            yield SurvivalRecord(self.continuous[i],self.categorical[i],float(self.time[i]),int(self.event[i]))

    def _clone(self,idx=None,**kwds):
        sel = (lambda a: a) if idx is None else (lambda a: None if a is None else a[idx])
        d = dict(continuous=sel(self.continuous),categorical=sel(self.categorical),
                time=sel(self.time),event=sel(self.event),schema=self.schema,
                labels=sel(self.labels),ids=sel(self.ids),latentTimes=sel(self.latentTimes))
        d.update(kwds)
        ds = self.__class__(**d)
        ds.unknownLevels = dict(self.unknownLevels)
        return ds

    def subset(self,indices):
        return self._clone(np.asarray(indices,dtype=np.int64))

    def withContinuous(self,continuous,schema=None):
        return self._clone(continuous=continuous,schema=schema or self.schema)

    def withLabels(self,labels):
        return self._clone(labels=labels)

def fingerprint(ds):
    '''(row count, md5 of column names and values)'''
    s = ds.schema
    names = '|'.join(s.continuous+s.categorical+[s.time,s.event])
    return len(ds), getMd5(names,np.ascontiguousarray(ds.continuous),np.ascontiguousarray(ds.categorical),
                        np.ascontiguousarray(ds.time),np.ascontiguousarray(ds.event))

def _badRow(mask,what,column,values):
    bad = np.flatnonzero(mask)
    if bad.size:
        i = bad[0]
        raise DataError('row %d (line %d): bad %s value %r in column %s' % (i+1,i+2,what,values[i],column))

def _isMissing(s):
    return s.str.strip().str.lower().isin(_NA_STRINGS)

def loadCsv(path,schema):
    '''parse a headed CSV according to schema.

    Categorical levels not yet known to the schema are learned from the file
    (sorted); with known levels an unseen value maps to the missing level and
    is counted in dataset.unknownLevels.
    '''
    try:
        df = pd.read_csv(path,dtype=str,keep_default_na=False,skipinitialspace=True)
    except (OSError,pd.errors.ParserError,pd.errors.EmptyDataError) as e:
        raise DataError('cannot parse %s: %s' % (path,e))
    need = [schema.time,schema.event]+schema.continuous+schema.categorical+([schema.id] if schema.id else [])
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise DataError('%s: header lacks column(s) %s' % (path,', '.join(missing)))

    def numeric(col,what):
        raw = df[col]
        v = pd.to_numeric(raw.str.strip(),errors='coerce').to_numpy(dtype=float)
        return raw, v

    raw, time = numeric(schema.time,'time')
    _badRow(~(np.isfinite(time) & (time>0)),'time',schema.time,raw.to_numpy())
    raw, event = numeric(schema.event,'event')
    _badRow(~np.isin(event,(0.0,1.0)),'event',schema.event,raw.to_numpy())

    cont = np.empty((len(df),len(schema.continuous)))
    for j,c in enumerate(schema.continuous):
        raw, v = numeric(c,'continuous')
        _badRow(np.isnan(v) & ~_isMissing(raw).to_numpy(),'continuous',c,raw.to_numpy())
        cont[:,j] = v

    levels = dict(schema.levels)
    cat = np.zeros((len(df),len(schema.categorical)),dtype=np.int64)
    unknown = {}
    for j,c in enumerate(schema.categorical):
        raw = df[c].str.strip()
        miss = _isMissing(raw).to_numpy()
        if c not in levels:
            levels[c] = [MISSING]+sorted(set(raw[~miss]))
        index = {v:i for i,v in enumerate(levels[c])}
        idx = raw.map(index).to_numpy()
        isUnknown = pd.isna(idx) & ~miss
        if isUnknown.any():
            unknown[c] = int(isUnknown.sum())
            warnings.warn('%s: %d unknown level(s) in column %s mapped to %r' % (path,unknown[c],c,MISSING))
        idx = np.where(miss | isUnknown,0,idx)
        cat[:,j] = idx.astype(np.int64)

    ids = None
    if schema.id:
        raw, ids = numeric(schema.id,'id')
        _badRow(~np.isfinite(ids),'id',schema.id,raw.to_numpy())
    ds = Dataset(cont,cat,time,event.astype(np.int64),schema.replace(levels=levels),ids=ids)
    ds.unknownLevels = unknown
    return ds

def loadLabels(path,ds):
    '''attach ground-truth classes from an (id, class) CSV'''
    df = pd.read_csv(path)
    if not {'id','class'}<=set(df.columns):
        raise DataError('%s: labels file needs id and class columns' % path)
    m = dict(zip(df['id'].astype(np.int64),df['class'].astype(np.int64)))
    try:
        labels = np.array([m[i] for i in ds.ids],dtype=np.int64)
    except KeyError as e:
        raise DataError('%s: no label for record id %s' % (path,e))
    return ds.withLabels(labels)

def writeCsv(ds,path):
    s = ds.schema
    cols = {'id':ds.ids}
    for j,c in enumerate(s.continuous):
        cols[c] = ds.continuous[:,j]
    for j,c in enumerate(s.categorical):
        cols[c] = np.asarray(s.levels[c],dtype=object)[ds.categorical[:,j]]
    cols[s.time] = ds.time
    cols[s.event] = ds.event
    pd.DataFrame(cols).to_csv(path,index=False,float_format='%.17g')

def writeLabels(ds,path):
    if ds.labels is None:
        raise DataError('dataset has no ground-truth labels')
    pd.DataFrame({'id':ds.ids,'class':ds.labels}).to_csv(path,index=False)

def fitStandardizer(train):
    '''training-split column statistics; constant columns get std 1'''
    n = len(train.schema.continuous)
    if not n:
        return train.schema.replace(means=[],stds=[])
    scaler = StandardScaler().fit(train.continuous)
    means = np.where(np.isfinite(scaler.mean_),scaler.mean_,0.0)
    stds = np.where(np.isfinite(scaler.scale_) & (scaler.scale_>0),scaler.scale_,1.0)
    return train.schema.replace(means=means,stds=stds)

def applyStandardizer(schema,ds):
    '''standardize continuous columns; missing values become 0 (the training mean)'''
    if not schema.fitted:
        raise ConfigError('schema has no standardization statistics, call fitStandardizer first')
    if schema.continuous!=ds.schema.continuous:
        raise DataError('dataset columns %r do not match schema %r' % (ds.schema.continuous,schema.continuous))
    x = (ds.continuous-schema.means[None,:])/schema.stds[None,:]
    x = np.where(np.isnan(x),0.0,x)
    return ds.withContinuous(x,schema=ds.schema.replace(means=schema.means,stds=schema.stds))

class TimeGrid:
    '''m bins given by m+1 ascending edges starting at 0'''
    def __init__(self,edges):
        edges = np.asarray(edges,dtype=float).reshape(-1)
        if edges.size<3:
            raise ConfigError('a time grid needs at least 2 bins')
        if edges[0]!=0 or not np.all(np.diff(edges)>0):
            raise ConfigError('time grid edges must start at 0 and increase strictly')
        self.edges = _frozen(edges,float)

    @property
    def m(self):
        return self.edges.size-1

    @property
    def canonicalPoints(self):
        return np.arange(self.m)/(self.m-1.0)

    @property
    def evalTimes(self):
        '''right edge of every bin'''
        return self.edges[1:]

    def binIndex(self,times):
        j = np.searchsorted(self.edges,np.asarray(times,dtype=float),side='right')-1
        return np.clip(j,0,self.m-1)

    def __eq__(self,other):
        return isinstance(other,TimeGrid) and np.array_equal(self.edges,other.edges)

def makeTimeGrid(train,m):
    '''equal-width bins over [0, max training time]; later times fall in the last bin'''
    if m<2:
        raise ConfigError('need at least 2 time bins, got %d' % m)
    return TimeGrid(np.linspace(0.0,float(train.time.max()),m+1))

def discretize(ds,grid):
    b = grid.binIndex(ds.time)
    labels = (np.arange(grid.m)[None,:]>=b[:,None]).astype(np.int8)
    return EncodedTargets(b,labels,np.asarray(ds.event))

def split(ds,fractions=(0.8,0.1,0.1),seed=0):
    '''seeded disjoint (train, val, test) partition'''
    fractions = tuple(float(f) for f in fractions)
    if len(fractions)!=3 or min(fractions)<0 or abs(sum(fractions)-1)>1e-9:
        raise ConfigError('split fractions must be three non-negative numbers summing to 1, got %r' % (fractions,))
    N = len(ds)
    nVal = int(round(fractions[1]*N))
    nTest = int(round(fractions[2]*N))
    nTrain = N-nVal-nTest
    for name,n in (('train',nTrain),('val',nVal),('test',nTest)):
        if n<=0:
            raise DataError('%s split of %d records with fractions %r is empty' % (name,N,fractions))
    perm = np.random.default_rng(seed).permutation(N)
    parts = perm[:nTrain], perm[nTrain:nTrain+nVal], perm[nTrain+nVal:]
    return tuple(ds.subset(np.sort(p)) for p in parts)

SYNTHETIC_KEYS = ('classMeans','classStds','censorRate','samplesPerClass','featureDim','seed','radius')

class SyntheticSpec:
    def __init__(self,classMeans=CLASS_MEANS,classStds=CLASS_STDS,censorRate=0.15,
            samplesPerClass=625,featureDim=16,seed=0,radius=3.0):
        self.classMeans = tuple(float(_) for _ in classMeans)
        self.classStds = tuple(float(_) for _ in classStds)
        self.censorRate = float(censorRate)
        self.samplesPerClass = int(samplesPerClass)
        self.featureDim = int(featureDim)
        self.seed = int(seed)
        self.radius = float(radius)
        self.validate()

    def validate(self):
        if len(self.classMeans)!=len(self.classStds) or not self.classMeans:
            raise ConfigError('class means and stds must be non-empty and of equal length')
        if not 0<=self.censorRate<1:
            raise ConfigError('censor rate must lie in [0, 1), got %r' % self.censorRate)
        if self.samplesPerClass<1 or self.featureDim<1:
            raise ConfigError('samples per class and feature dim must be positive')
        for m,s in zip(self.classMeans,self.classStds):
            lognormalParams(m,s)

    def toDict(self):
        return dict(classMeans=list(self.classMeans),classStds=list(self.classStds),
                censorRate=self.censorRate,samplesPerClass=self.samplesPerClass,
                featureDim=self.featureDim,seed=self.seed,radius=self.radius)

    @classmethod
    def fromDict(cls,d):
        '''inverse of toDict; unknown keys are a ConfigError'''
        bad = sorted(set(d)-set(SYNTHETIC_KEYS))
        if bad:
            raise ConfigError('unknown synthetic data key(s) %s, valid keys are %s' % (', '.join(bad),', '.join(SYNTHETIC_KEYS)))
        try:
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError,ValueError) as e:
            raise ConfigError('bad synthetic data settings: %s' % e)

def lognormalParams(m,s):
    '''(mu, sigma) of the log-normal with mean m and standard deviation s'''
    if not (m>0 and s>0):
        raise ConfigError('log-normal mean and std must be positive, got (%r, %r)' % (m,s))
    mu = math.log(m*m/math.sqrt(s*s+m*m))
    sigma = math.sqrt(math.log1p(s*s/(m*m)))
    return mu, sigma

def generateSynthetic(spec):
    '''class-conditional Gaussian blobs with log-normal event times and uniform censoring'''
    rng = np.random.default_rng(spec.seed)
    K = len(spec.classMeans)
    N = K*spec.samplesPerClass
    centers = rng.standard_normal((K,spec.featureDim))
    centers *= spec.radius/np.linalg.norm(centers,axis=1,keepdims=True)
    labels = np.repeat(np.arange(K),spec.samplesPerClass)
    x = centers[labels]+rng.standard_normal((N,spec.featureDim))
    params = np.array([lognormalParams(m,s) for m,s in zip(spec.classMeans,spec.classStds)])
    latent = rng.lognormal(params[labels,0],params[labels,1])
    nc = int(math.floor(spec.censorRate*N+1e-9))
    censored = rng.choice(N,size=nc,replace=False)
    event = np.ones(N,dtype=np.int64)
    event[censored] = 0
    time = latent.copy()
    c = rng.uniform(0.0,latent[censored])
    time[censored] = np.where(c>0,c,latent[censored]*1e-12)
    perm = rng.permutation(N)
    schema = FeatureSchema(continuous=['x%d' % i for i in range(spec.featureDim)],id='id')
    return Dataset(x[perm],None,time[perm],event[perm],schema,labels=labels[perm],latentTimes=latent[perm])
