#see LICENSE.txt for license details

"""Discrete-time MTLR likelihood.

Increment logits z (length m, last entry 0 by convention) map to an event PMF
through the suffix sums u_j = z_j + ... + z_m followed by a softmax over the m
outcomes.  Bin m-1 absorbs "event at or beyond the horizon".  Everything works
on the trailing dimension so batches are just leading dimensions.
"""
import numpy as np
import torch
from . import DataError, DimensionError

PMF_FLOOR = 1e-12

def suffixSums(z):
    return torch.flip(torch.cumsum(torch.flip(z,(-1,)),-1),(-1,))

def logitsToPmf(z):
    return torch.softmax(suffixSums(z),-1)

def pmfToLogits(p):
    p = p.clamp_min(PMF_FLOOR)
    lp = torch.log(p/p.sum(-1,keepdim=True))
    return torch.cat((lp[...,:-1]-lp[...,1:],torch.zeros_like(lp[...,:1])),-1)

def _bins(z,binIndex):
    b = torch.as_tensor(binIndex,dtype=torch.long,device=z.device)
    m = z.shape[-1]
    if b.shape!=z.shape[:-1]:
        raise DimensionError('got %d bin indices for %d logit vectors' % (b.numel(),z[...,0].numel()))
    if b.numel() and (int(b.min())<0 or int(b.max())>=m):
        raise DataError('bin index outside [0, %d]' % (m-1))
    return b

def uncensoredNll(z,binIndex,event=None):
    '''-log p_bin for records whose event was observed'''
    if event is not None and not bool(np.all(np.asarray(event)==1)):
        raise DataError('uncensoredNll called with a censored target')
    b = _bins(z,binIndex)
    return -torch.log_softmax(suffixSums(z),-1).gather(-1,b.unsqueeze(-1)).squeeze(-1)

def censoredNll(z,binIndex):
    '''-log of the PMF tail mass from the censoring bin onwards'''
    b = _bins(z,binIndex)
    u = suffixSums(z)
    k = torch.arange(z.shape[-1],device=z.device)
    tail = torch.where(k>=b.unsqueeze(-1),u,torch.full_like(u,-np.inf))
    return torch.logsumexp(u,-1)-torch.logsumexp(tail,-1)

def nllPerRecord(z,binIndex,event):
    ev = torch.as_tensor(np.asarray(event),device=z.device).bool()
    return torch.where(ev,uncensoredNll(z,binIndex),censoredNll(z,binIndex))

def batchLoss(pmf,binIndex,event,lambdaLb=0.0,alpha=None):
    '''mean NLL of a batch of head PMFs plus the load-balancing term'''
    if pmf.shape[0]==0:
        raise DataError('empty batch')
    loss = nllPerRecord(pmfToLogits(pmf),binIndex,event).mean()
    if alpha is not None and lambdaLb:
        from .heads import loadBalanceLoss
        loss = loss+loadBalanceLoss(alpha,lambdaLb)
    return loss

def survivalCurve(p):
    '''S_j = 1 - sum_{k<=j} p_k; accepts tensors or arrays'''
    if torch.is_tensor(p):
        return (1-torch.cumsum(p,-1)).clamp_min(0)
    return np.clip(1-np.cumsum(np.asarray(p,dtype=float),-1),0,None)

def constantPmfBaseline(binIndex,event,m):
    '''the event-bin histogram of the training split, floored and renormalized.

    Censored records spread their unit mass uniformly over the bins at or after
    their censoring bin.
    '''
    b = np.asarray(binIndex,dtype=np.int64)
    e = np.asarray(event)
    if b.size==0:
        raise DataError('cannot build a baseline from no records')
    h = np.bincount(b[e==1],minlength=m).astype(float)
    for j in b[e==0]:
        h[j:] += 1.0/(m-j)
    h = np.maximum(h/h.sum(),PMF_FLOOR)
    return h/h.sum()
