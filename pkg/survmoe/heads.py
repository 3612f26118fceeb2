#see LICENSE.txt for license details

"""Prediction heads mapping a backbone hidden state x (batch x h) to event PMFs.

    mtlr          a single linear map to increment logits
    fixed         router weights over n shared prototype PMFs
    adjustable    as fixed, but each prototype is resampled through a
                  per-record monotone warp of the time axis
    personalized  router and expert inputs are separate projections of x and
                  each expert builds its scores from its own chunk of x_e

Every head's forward returns (pmf, alpha); alpha is None for the mtlr head.

The warp is a normalized mixture of two logistics
    F(u) = w1*sig(a1*(u-c1)) + w2*sig(a2*(u-c2)),  phi(u) = (F(u)-F(0))/D
with D = max(F(1)-F(0), D_MIN).  Its inverse is found by bisection and the
gradients of the inverse come from the implicit function theorem rather than
from differentiating the bisection.
"""
import math, warnings
from collections import namedtuple
import torch
from torch import nn
import torch.nn.functional as F
from . import ConfigError, DataError, DimensionError
from .mtlr import logitsToPmf

HEADS = ('mtlr','fixed','adjustable','personalized')
A_MIN, A_MAX = 0.1, 35.0
C_LO, C_HI, C_GAP = 0.02, 0.98, 0.02
D_MIN = 1e-6
DTAU_MIN = 1e-8
BISECT_STEPS = 20
NEWTON_STEPS = 3
#raw warp-generator outputs per expert: weight logits, slope logits, center logits
WARP_RAW = 6
_SLOPE_BIAS_INIT = -4.0

WarpParams = namedtuple('WarpParams','w a c')

def route(x,W,kappa):
    if x.shape[-1]!=W.shape[-1]:
        raise DimensionError('hidden state has dimension %d, router expects %d' % (x.shape[-1],W.shape[-1]))
    return torch.softmax(x@W.transpose(-1,-2)/kappa,-1)

def constrainWarpParams(raw):
    if raw.shape[-1]!=WARP_RAW:
        raise DimensionError('warp parameters need %d raw values, got %d' % (WARP_RAW,raw.shape[-1]))
    w = torch.softmax(raw[...,0:2],-1)
    a = A_MIN+(A_MAX-A_MIN)*torch.sigmoid(raw[...,2:4])
    c1 = C_LO+torch.sigmoid(raw[...,4])*(C_HI-C_LO-C_GAP)
    c2 = c1+C_GAP+torch.sigmoid(raw[...,5])*(C_HI-c1-C_GAP)
    return WarpParams(w,a,torch.stack((c1,c2),-1))

def _sig(u,a,c):
    '''logistics at points u (...,K) for params (...,2) -> (...,K,2)'''
    return torch.sigmoid(a.unsqueeze(-2)*(u.unsqueeze(-1)-c.unsqueeze(-2)))

def _F(u,w,a,c):
    return (w.unsqueeze(-2)*_sig(u,a,c)).sum(-1)

def _dFdu(u,w,a,c):
    s = _sig(u,a,c)
    return (w.unsqueeze(-2)*a.unsqueeze(-2)*s*(1-s)).sum(-1)

def _dFdtheta(u,w,a,c):
    '''elementwise partials of F(u) in (w, a, c), each (...,K,2)'''
    s = _sig(u,a,c)
    ds = s*(1-s)
    w = w.unsqueeze(-2)
    return s, w*ds*(u.unsqueeze(-1)-c.unsqueeze(-2)), -w*ds*a.unsqueeze(-2)

def _ends(w,a,c):
    z = torch.zeros(w.shape[:-1]+(1,),dtype=w.dtype,device=w.device)
    F0 = _F(z,w,a,c)
    F1 = _F(z+1,w,a,c)
    return F0, F1

def warpDenominator(wp):
    F0, F1 = _ends(*wp)
    return (F1-F0).squeeze(-1)

def _points(u,wp):
    u = torch.as_tensor(u,dtype=wp.w.dtype,device=wp.w.device)
    return u, u.dim()==0

def warpForward(u,wp):
    '''phi at points u; the last axis of u indexes points, leading axes follow wp'''
    u, scalar = _points(u,wp)
    if scalar: u = u.reshape(1)
    F0, F1 = _ends(*wp)
    phi = (_F(u,*wp)-F0)/(F1-F0).clamp_min(D_MIN)
    return phi.squeeze(-1) if scalar else phi

def _bisect(t,w,a,c,polish):
    F0, F1 = _ends(w,a,c)
    target = F0+t*(F1-F0).clamp_min(D_MIN)
    lo = torch.zeros_like(target)
    hi = torch.ones_like(target)
    for _ in range(BISECT_STEPS):
        mid = 0.5*(lo+hi)
        below = _F(mid,w,a,c)<target
        lo = torch.where(below,mid,lo)
        hi = torch.where(below,hi,mid)
    tau = 0.5*(lo+hi)
    if polish:
        for _ in range(NEWTON_STEPS):
            step = tau-(_F(tau,w,a,c)-target)/_dFdu(tau,w,a,c).clamp_min(DTAU_MIN)
            tau = torch.minimum(torch.maximum(step,lo),hi)
    tau = torch.where(t<=0,torch.zeros_like(tau),tau)
    return torch.where(t>=1,torch.ones_like(tau),tau)

def warpInverseGradients(tauStar,wp,t=None):
    '''(dtau/dw, dtau/da, dtau/dc, dtau/dt) at the root tauStar of phi(tau)=t.

    The parameter gradients have shape tauStar.shape+(2,).  They are
    -dG/dtheta / dG/dtau for G(tau) = F(tau) - F(0) - t*D, with the D terms
    dropped where D is clipped at D_MIN.
    '''
    w, a, c = wp
    if t is None:
        t = warpForward(tauStar,wp)
    t = t.expand_as(tauStar)
    F0, F1 = _ends(w,a,c)
    D = F1-F0
    clipped = (D<D_MIN).expand_as(tauStar)
    dtau = _dFdu(tauStar,w,a,c)
    if bool((dtau<DTAU_MIN).any()):
        warnings.warn('near-flat warp: dF/dtau below %g clamped' % DTAU_MIN)
        dtau = dtau.clamp_min(DTAU_MIN)
    zero = torch.zeros_like(tauStar[...,:1])
    tw = t.unsqueeze(-1)
    nc = (~clipped).to(tauStar.dtype).unsqueeze(-1)
    grads = []
    for g, g0, g1 in zip(_dFdtheta(tauStar,w,a,c),_dFdtheta(zero,w,a,c),_dFdtheta(zero+1,w,a,c)):
        dG = g-g0-nc*tw*(g1-g0)
        grads.append(-dG/dtau.unsqueeze(-1))
    dtdt = D.clamp_min(D_MIN)/dtau
    inner = ((t>0) & (t<1)).to(tauStar.dtype)
    grads = [g*inner.unsqueeze(-1) for g in grads]
    return grads[0], grads[1], grads[2], dtdt*inner

class WarpInverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx,t,w,a,c,polish):
        ctx.tShape = t.shape
        shape = torch.broadcast_shapes(t.shape,w.shape[:-1]+(1,))
        t = t.expand(shape)
        with torch.no_grad():
            tau = _bisect(t,w,a,c,polish)
        ctx.save_for_backward(tau,t,w,a,c)
        return tau

    @staticmethod
    def backward(ctx,gtau):
        tau, t, w, a, c = ctx.saved_tensors
        gw, ga, gc, gt = warpInverseGradients(tau,WarpParams(w,a,c),t)
        out = [None]*5
        if ctx.needs_input_grad[0]:
            out[0] = (gtau*gt).sum_to_size(ctx.tShape)
        for i,(g,p) in enumerate(((gw,w),(ga,a),(gc,c)),1):
            if ctx.needs_input_grad[i]:
                out[i] = (gtau.unsqueeze(-1)*g).sum(-2).sum_to_size(p.shape)
        return tuple(out)

def warpInverse(t,wp,polish=False):
    '''psi(t): the tau in [0,1] with phi(tau)=t

    The plain bisection midpoint is returned unless polish is set, which adds
    a few bracketed Newton steps.  Finite-difference checks need the polished
    root; training uses the midpoint.
    '''
    t, scalar = _points(t,wp)
    if scalar: t = t.reshape(1)
    tau = WarpInverse.apply(t,wp.w,wp.a,wp.c,polish)
    return tau.squeeze(-1) if scalar else tau

def resamplePrototype(M,wp,t,polish=False):
    '''linearly interpolate prototype scores M (...,m) at (m-1)*psi(t)'''
    m = M.shape[-1]
    u = (m-1)*warpInverse(t,wp,polish)
    M = M.expand(u.shape)
    i0 = torch.floor(u.detach()).long().clamp(0,m-1)
    i1 = (i0+1).clamp(max=m-1)
    f = u-i0.to(u.dtype)
    return (1-f)*M.gather(-1,i0)+f*M.gather(-1,i1)

def loadBalanceLoss(alpha,lambdaLb):
    if alpha.shape[0]==0:
        raise DataError('load balance needs a non-empty batch')
    abar = alpha.mean(0)
    return lambdaLb*alpha.shape[-1]*(abar*abar).sum()

def _inverseSoftplus(y):
    return math.log(math.expm1(y))

class Router(nn.Module):
    def __init__(self,h,n,kappaInit=2.0):
        super().__init__()
        if kappaInit<=0:
            raise ConfigError('kappa must be positive, got %r' % kappaInit)
        self.weight = nn.Parameter(torch.empty(n,h).uniform_(-1/math.sqrt(h),1/math.sqrt(h)))
        self.rawKappa = nn.Parameter(torch.tensor(_inverseSoftplus(kappaInit)))

    @property
    def kappa(self):
        return F.softplus(self.rawKappa)

    def forward(self,x):
        return route(x,self.weight,self.kappa)

class MtlrHead(nn.Module):
    nExperts = 0
    def __init__(self,h,m):
        super().__init__()
        self.linear = nn.Linear(h,m)

    def forward(self,x):
        return logitsToPmf(self.linear(x)), None

class FixedMoeHead(nn.Module):
    def __init__(self,h,n,m,kappaInit=2.0):
        super().__init__()
        self.nExperts = n
        self.router = Router(h,n,kappaInit)
        self.prototypes = nn.Parameter(torch.empty(n,m).normal_(0,0.01))

    def forward(self,x):
        alpha = self.router(x)
        return alpha@torch.softmax(self.prototypes,-1), alpha

class AdjustableMoeHead(nn.Module):
    def __init__(self,h,n,m,kappaInit=2.0,polish=False):
        super().__init__()
        self.nExperts = n
        self.polish = polish
        self.router = Router(h,n,kappaInit)
        self.prototypes = nn.Parameter(torch.empty(n,m).normal_(0,0.01))
        self.warpGenerator = nn.Linear(h,n*WARP_RAW)
        #shallow slopes give a near-identity warp while the slope logits still get gradient
        with torch.no_grad():
            self.warpGenerator.weight.zero_()
            bias = torch.zeros(n,WARP_RAW)
            bias[:,2:4] = _SLOPE_BIAS_INIT
            self.warpGenerator.bias.copy_(bias.reshape(-1))
        self.register_buffer('canonical',torch.arange(m,dtype=torch.float32)/(m-1))

    def warpParams(self,x):
        raw = self.warpGenerator(x)
        return constrainWarpParams(raw.reshape(raw.shape[:-1]+(self.nExperts,WARP_RAW)))

    def forward(self,x):
        alpha = self.router(x)
        warped = resamplePrototype(self.prototypes,self.warpParams(x),self.canonical.to(x.dtype),self.polish)
        return torch.einsum('bn,bnm->bm',alpha,torch.softmax(warped,-1)), alpha

class PersonalizedMoeHead(nn.Module):
    def __init__(self,h,n,m,kappaInit=2.0):
        super().__init__()
        if h%n:
            raise ConfigError('hidden dim %d is not divisible by %d experts' % (h,n))
        self.nExperts = n
        self.routerProjection = nn.Linear(h,h,bias=False)
        self.expertProjection = nn.Linear(h,h,bias=False)
        self.router = Router(h,n,kappaInit)
        d = h//n
        self.expertWeight = nn.Parameter(torch.empty(n,m,d).uniform_(-1/math.sqrt(d),1/math.sqrt(d)))
        self.expertBias = nn.Parameter(torch.zeros(n,m))

    def forward(self,x):
        n = self.nExperts
        xe = self.expertProjection(x)
        xe = xe.reshape(xe.shape[:-1]+(n,xe.shape[-1]//n))
        M = torch.einsum('bnd,nmd->bnm',xe,self.expertWeight)+self.expertBias
        alpha = self.router(self.routerProjection(x))
        return torch.einsum('bn,bnm->bm',alpha,torch.softmax(M,-1)), alpha

def makeHead(name,h,n,m,kappaInit=2.0):
    if name not in HEADS:
        raise ConfigError('unknown head %r, valid heads are %s' % (name,', '.join(HEADS)))
    if h<1 or m<2:
        raise ConfigError('need h >= 1 and m >= 2, got h=%r m=%r' % (h,m))
    if name=='mtlr':
        return MtlrHead(h,m)
    if n<1:
        raise ConfigError('need at least one expert, got %r' % n)
    return dict(fixed=FixedMoeHead,adjustable=AdjustableMoeHead,personalized=PersonalizedMoeHead)[name](h,n,m,kappaInit)
