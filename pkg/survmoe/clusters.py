#see LICENSE.txt for license details

"""Reading router weights as a clustering of records."""
import warnings
from collections import namedtuple
import numpy as np
import pandas as pd
from sklearn.metrics import adjusted_rand_score
from . import DataError, DimensionError
from .metrics import kaplanMeier

Z_THRESHOLD = 2.0

ClusterAssignment = namedtuple('ClusterAssignment','expert alpha')
RoutingReport = namedtuple('RoutingReport','matrix purity sizes')
HabermanReport = namedtuple('HabermanReport','z flags skipped')
ClusterCurve = namedtuple('ClusterCurve','size curve')

def top1Assign(alphas):
    '''argmax expert per record, ties to the lowest index'''
    alphas = np.atleast_2d(np.asarray(alphas,dtype=float))
    return ClusterAssignment(np.argmax(alphas,axis=1),alphas)

def _index(a):
    return a.expert if isinstance(a,ClusterAssignment) else np.asarray(a,dtype=np.int64)

class ContingencyTable:
    def __init__(self,counts):
        self.counts = np.asarray(counts,dtype=float)
        if self.counts.ndim!=2 or (self.counts<0).any():
            raise DataError('contingency counts must be a non-negative matrix')

    @property
    def rowTotals(self):
        return self.counts.sum(1)

    @property
    def colTotals(self):
        return self.counts.sum(0)

    @property
    def N(self):
        return float(self.counts.sum())

def contingencyTable(clusters,levels,nClusters=None,nLevels=None):
    c = _index(clusters)
    k = np.asarray(levels,dtype=np.int64)
    if c.shape!=k.shape:
        raise DimensionError('%d cluster indices but %d levels' % (c.size,k.size))
    nClusters = nClusters or (int(c.max())+1 if c.size else 0)
    nLevels = nLevels or (int(k.max())+1 if k.size else 0)
    counts = np.zeros((nClusters,nLevels))
    np.add.at(counts,(c,k),1)
    return ContingencyTable(counts)

def routingMatrix(assignments,labels,nExperts=None,nClasses=None):
    '''row-normalized expert x class fractions and the Top-1 purity'''
    t = contingencyTable(assignments,labels,nExperts,nClasses)
    sizes = t.rowTotals
    with np.errstate(invalid='ignore',divide='ignore'):
        matrix = np.where(sizes[:,None]>0,t.counts/sizes[:,None],0.0)
    purity = float(t.counts.max(1).sum()/t.N) if t.N else 0.0
    return RoutingReport(matrix,purity,sizes.astype(np.int64))

def habermanZ(table,threshold=Z_THRESHOLD):
    '''adjusted residuals; cells with zero expected count are NaN and listed in skipped'''
    if not isinstance(table,ContingencyTable):
        table = ContingencyTable(table)
    N = table.N
    if N<=0:
        raise DataError('empty contingency table')
    nc = table.rowTotals[:,None]
    nk = table.colTotals[None,:]
    e = nc*nk/N
    var = e*(1-nc/N)*(1-nk/N)
    ok = var>0
    z = np.full(e.shape,np.nan)
    z[ok] = (table.counts[ok]-e[ok])/np.sqrt(var[ok])
    flags = [(int(c),int(k),float(z[c,k])) for c,k in zip(*np.nonzero(ok & (np.abs(np.nan_to_num(z))>threshold)))]
    skipped = [(int(c),int(k)) for c,k in zip(*np.nonzero(~ok))]
    return HabermanReport(z,flags,skipped)

def ari(a,b):
    a, b = _index(a), _index(b)
    if a.shape!=b.shape:
        raise DimensionError('partitions have %d and %d records' % (a.size,b.size))
    return float(adjusted_rand_score(a,b))

def pairwiseAri(assignments):
    '''ARI over every unordered pair; returns ([(i, j, ari)], mean)'''
    if len(assignments)<2:
        raise DataError('pairwise ARI needs at least two assignments')
    pairs = [(i,j,ari(assignments[i],assignments[j]))
            for i in range(len(assignments)) for j in range(i+1,len(assignments))]
    return pairs, float(np.mean([p[2] for p in pairs]))

def kmByCluster(assignments,times,events,nClusters=None):
    '''{cluster: ClusterCurve}; empty clusters are left out with a warning'''
    c = _index(assignments)
    times = np.asarray(times,dtype=float)
    events = np.asarray(events)
    if not c.shape==times.shape==events.shape:
        raise DimensionError('assignments, times and events must have equal lengths')
    out = {}
    for k in range(nClusters or (int(c.max())+1 if c.size else 0)):
        sel = c==k
        if not sel.any():
            warnings.warn('cluster %d has no records and is omitted' % k)
            continue
        out[k] = ClusterCurve(int(sel.sum()),kaplanMeier(times[sel],events[sel]))
    return out

def clusterQuantiles(assignments,continuous,names):
    '''per cluster and feature: min, 25%, median, 75%, max'''
    cols = ['cluster','feature','min','q25','median','q75','max']
    names = list(names)
    c = _index(assignments)
    if not names or not c.size:
        return pd.DataFrame(columns=cols)
    df = pd.DataFrame(np.asarray(continuous,dtype=float).reshape(c.size,len(names)),columns=names)
    df['cluster'] = c
    d = df.melt(id_vars='cluster',var_name='feature').groupby(['cluster','feature'])['value'].describe()
    d = d[['min','25%','50%','75%','max']]
    d.columns = ['min','q25','median','q75','max']
    return d.reset_index()
