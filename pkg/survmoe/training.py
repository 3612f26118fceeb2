#see LICENSE.txt for license details

"""Backbone, training loop, checkpoints and finite-difference gradient checks."""
import copy, math, pickle
from collections import namedtuple
from dataclasses import dataclass, field, asdict, fields
import numpy as np
import pandas as pd
import torch
from torch import nn
from . import ConfigError, DataError, DimensionError, NumericalError, vpel, VERSION
from .data import FeatureSchema, TimeGrid, makeTimeGrid, discretize
from .heads import makeHead
from .mtlr import batchLoss

ADAM_BETAS = (0.9,0.999)
ADAM_EPS = 1e-8
EMBEDDING_INIT = 0.05
CHECKPOINT_FORMAT = 1
PREDICT_CHUNK = 4096

Batch = namedtuple('Batch','continuous categorical binIndex event')

def _checkKeys(cls,d):
    names = {f.name for f in fields(cls)}
    bad = sorted(set(d)-names)
    if bad:
        raise ConfigError('unknown %s key(s) %s, valid keys are %s' % (cls.__name__,', '.join(bad),', '.join(sorted(names))))

@dataclass
class BackboneConfig:
    hidden_dim: int = 64
    num_layers: int = 1
    embedding_dims: dict = field(default_factory=dict)

    @classmethod
    def fromDict(cls,d):
        _checkKeys(cls,d)
        return cls(**d)

    def validate(self,head=None,experts=None):
        if self.hidden_dim<1 or self.num_layers<1:
            raise ConfigError('hidden_dim and num_layers must be >= 1, got %r and %r' % (self.hidden_dim,self.num_layers))
        if head=='personalized' and experts and self.hidden_dim%experts:
            ok = [n for n in range(1,self.hidden_dim+1) if self.hidden_dim%n==0]
            raise ConfigError('hidden dim %d is not divisible by %d experts; valid expert counts are %s'
                    % (self.hidden_dim,experts,', '.join(map(str,ok))))

@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 64
    lambda_lb: float = 0.01
    kappa_init: float = 2.0
    time_bins: int = 100
    patience: int = 10
    max_epochs: int = 200
    seed: int = 0
    double: bool = True

    @classmethod
    def fromDict(cls,d):
        _checkKeys(cls,d)
        return cls(**d)

    def validate(self):
        for name in ('learning_rate','batch_size','kappa_init','patience','max_epochs'):
            if not getattr(self,name)>0:
                raise ConfigError('%s must be positive, got %r' % (name,getattr(self,name)))
        if self.lambda_lb<0:
            raise ConfigError('lambda_lb must be non-negative, got %r' % self.lambda_lb)
        if self.time_bins<2:
            raise ConfigError('time_bins must be at least 2, got %r' % self.time_bins)

    @property
    def dtype(self):
        return torch.float64 if self.double else torch.float32

def _uniformFanIn(linear):
    bound = 1/math.sqrt(linear.in_features)
    nn.init.uniform_(linear.weight,-bound,bound)
    if linear.bias is not None:
        nn.init.uniform_(linear.bias,-bound,bound)

class Backbone(nn.Module):
    '''categorical embeddings + continuous features through l ReLU layers'''
    def __init__(self,schema,cfg):
        super().__init__()
        self.nContinuous = len(schema.continuous)
        dims = [int(cfg.embedding_dims.get(c,schema.embeddingDim(c))) for c in schema.categorical]
        self.embeddings = nn.ModuleList(nn.Embedding(k,d) for k,d in zip(schema.cardinalities,dims))
        for e in self.embeddings:
            nn.init.uniform_(e.weight,-EMBEDDING_INIT,EMBEDDING_INIT)
        dIn = self.nContinuous+sum(dims)
        if not dIn:
            raise ConfigError('schema declares no feature columns')
        layers = []
        for i in range(cfg.num_layers):
            linear = nn.Linear(dIn if i==0 else cfg.hidden_dim,cfg.hidden_dim)
            _uniformFanIn(linear)
            layers += [linear,nn.ReLU()]
        self.layers = nn.Sequential(*layers)

    def forward(self,continuous,categorical):
        if continuous.shape[-1]!=self.nContinuous or categorical.shape[-1]!=len(self.embeddings):
            raise DimensionError('records have %d continuous and %d categorical columns, backbone expects %d and %d'
                    % (continuous.shape[-1],categorical.shape[-1],self.nContinuous,len(self.embeddings)))
        parts = [continuous]+[e(categorical[:,j]) for j,e in enumerate(self.embeddings)]
        return self.layers(torch.cat(parts,-1))

class SurvivalModel(nn.Module):
    def __init__(self,schema,backboneCfg,head,experts,m,kappaInit=2.0):
        super().__init__()
        self.headName = head
        self.experts = experts if head!='mtlr' else 0
        self.m = m
        self.backbone = Backbone(schema,backboneCfg)
        self.head = makeHead(head,backboneCfg.hidden_dim,experts,m,kappaInit)

    def forward(self,continuous,categorical):
        return self.head(self.backbone(continuous,categorical))

def buildModel(schema,backboneCfg,head,experts,m,config=None):
    config = config or TrainConfig()
    backboneCfg.validate(head,experts)
    torch.manual_seed(config.seed)
    model = SurvivalModel(schema,backboneCfg,head,experts,m,config.kappa_init)
    return model.to(config.dtype)

def encodeDataset(ds,grid,dtype=torch.float64):
    t = discretize(ds,grid)
    return Batch(torch.as_tensor(np.array(ds.continuous),dtype=dtype),
            torch.as_tensor(np.array(ds.categorical),dtype=torch.long),
            torch.as_tensor(t.binIndex,dtype=torch.long),
            torch.as_tensor(t.event,dtype=torch.long))

def takeBatch(batch,idx):
    return Batch(*(a[idx] for a in batch))

def modelLoss(model,batch,lambdaLb):
    pmf, alpha = model(batch.continuous,batch.categorical)
    return batchLoss(pmf,batch.binIndex,batch.event,lambdaLb,alpha)

def computeGradients(model,batch,lambdaLb=0.0):
    '''(loss, {parameter path: gradient}) for one batch'''
    model.zero_grad(set_to_none=True)
    loss = modelLoss(model,batch,lambdaLb)
    if not torch.isfinite(loss):
        raise NumericalError('non-finite loss %r' % float(loss))
    loss.backward()
    grads = {}
    for name,p in model.named_parameters():
        g = torch.zeros_like(p) if p.grad is None else p.grad
        if not bool(torch.isfinite(g).all()):
            raise NumericalError('non-finite gradient in %s' % name)
        grads[name] = g
    return loss.detach(), grads

def adamStep(params,grads,state=None,lr=5e-4):
    '''one Adam update of params in place; state carries the moments between calls'''
    params = list(params)
    if state is None:
        state = {}
    opt = state.get('optimizer')
    if opt is None:
        opt = state['optimizer'] = torch.optim.Adam(params,lr=lr,betas=ADAM_BETAS,eps=ADAM_EPS)
    for p,g in zip(params,grads):
        p.grad = g
    opt.step()
    return state

class EarlyStopping:
    def __init__(self,patience):
        if patience<1:
            raise ConfigError('patience must be at least 1, got %r' % patience)
        self.patience = patience
        self.best = math.inf
        self.bestEpoch = None
        self.bestState = None
        self.bad = 0

    def update(self,epoch,value,model=None):
        if value<self.best:
            self.best = value
            self.bestEpoch = epoch
            self.bad = 0
            if model is not None:
                self.bestState = copy.deepcopy(model.state_dict())
            return True
        self.bad += 1
        return False

    @property
    def stop(self):
        return self.bad>=self.patience

def evaluateLoss(model,batch,lambdaLb=0.0):
    with torch.no_grad():
        return float(modelLoss(model,batch,lambdaLb))

class TrainedModel:
    def __init__(self,model,schema,grid,backboneCfg,config,history,bestEpoch,split=None):
        self.model = model
        self.schema = schema
        self.grid = grid
        self.backboneCfg = backboneCfg
        self.config = config
        self.history = list(history)
        self.bestEpoch = bestEpoch
        self.split = split or {}
        self.extra = {}

    @property
    def head(self):
        return self.model.headName

    @property
    def experts(self):
        return self.model.experts

    @property
    def bestValLoss(self):
        return min(v for _,_,v in self.history) if self.history else math.nan

    def historyFrame(self):
        return pd.DataFrame(self.history,columns=['epoch','train_loss','val_loss'])

    def writeHistory(self,path):
        self.historyFrame().to_csv(path,index=False,float_format='%.17g')

def train(trainDs,valDs,backboneCfg,head,experts,config,grid=None,verbose=None):
    '''mini-batch Adam with early stopping on the validation NLL; returns the best-epoch model'''
    config.validate()
    if not len(trainDs) or not len(valDs):
        raise DataError('train and validation splits must be non-empty')
    grid = grid or makeTimeGrid(trainDs,config.time_bins)
    model = buildModel(trainDs.schema,backboneCfg,head,experts,grid.m,config)
    tr = encodeDataset(trainDs,grid,config.dtype)
    va = encodeDataset(valDs,grid,config.dtype)
    names, params = zip(*model.named_parameters())
    gen = torch.Generator().manual_seed(config.seed)
    state = {}
    stopper = EarlyStopping(config.patience)
    history = []
    N = len(trainDs)
    for epoch in range(1,config.max_epochs+1):
        model.train()
        perm = torch.randperm(N,generator=gen)
        total = 0.0
        for b,start in enumerate(range(0,N,config.batch_size)):
            idx = perm[start:start+config.batch_size]
            try:
                loss, grads = computeGradients(model,takeBatch(tr,idx),config.lambda_lb)
            except NumericalError as e:
                raise NumericalError('epoch %d batch %d: %s' % (epoch,b,e))
            adamStep(params,[grads[n] for n in names],state,config.learning_rate)
            total += float(loss)*len(idx)
        model.eval()
        valLoss = evaluateLoss(model,va)
        if not math.isfinite(valLoss):
            raise NumericalError('epoch %d: non-finite validation loss' % epoch)
        history.append((epoch,total/N,valLoss))
        stopper.update(epoch,valLoss,model)
        vpel('epoch %3d train %.6f val %.6f%s' % (epoch,total/N,valLoss,' *' if stopper.bestEpoch==epoch else ''),verbose)
        if stopper.stop:
            vpel('early stop at epoch %d, best epoch %d' % (epoch,stopper.bestEpoch),verbose)
            break
    model.load_state_dict(stopper.bestState)
    return TrainedModel(model,trainDs.schema,grid,backboneCfg,config,history,stopper.bestEpoch)

def predictPmf(model,ds,grid=None):
    '''(pmf N x m, alpha N x n or None) as numpy arrays'''
    if isinstance(model,TrainedModel):
        model = model.model
    dtype = next(model.parameters()).dtype
    x = torch.as_tensor(np.array(ds.continuous),dtype=dtype)
    k = torch.as_tensor(np.array(ds.categorical),dtype=torch.long)
    pmfs, alphas = [], []
    model.eval()
    with torch.no_grad():
        for s in range(0,len(ds),PREDICT_CHUNK):
            p, a = model(x[s:s+PREDICT_CHUNK],k[s:s+PREDICT_CHUNK])
            pmfs.append(p.cpu().numpy())
            if a is not None:
                alphas.append(a.cpu().numpy())
    pmf = np.concatenate(pmfs) if pmfs else np.zeros((0,model.m))
    return pmf, (np.concatenate(alphas) if alphas else None)

def countParameters(model):
    if isinstance(model,TrainedModel):
        model = model.model
    count = lambda mod: sum(p.numel() for p in mod.parameters())
    return dict(total=count(model),backbone=count(model.backbone),head=count(model.head))

def saveCheckpoint(trained,path,extra=None):
    torch.save(dict(
            format=CHECKPOINT_FORMAT,
            version=VERSION,
            state={k:v.detach().cpu() for k,v in trained.model.state_dict().items()},
            backbone=asdict(trained.backboneCfg),
            train=asdict(trained.config),
            head=trained.head,
            experts=trained.experts,
            schema=trained.schema.toDict(),
            edges=[float(_) for _ in trained.grid.edges],
            split=dict(trained.split),
            history=[list(h) for h in trained.history],
            bestEpoch=trained.bestEpoch,
            extra=extra or {},
            ),path)

def loadCheckpoint(path):
    try:
        d = torch.load(path,map_location='cpu',weights_only=True)
    except (OSError,RuntimeError,EOFError,pickle.UnpicklingError) as e:
        raise ConfigError('cannot load checkpoint %s: %s' % (path,e))
    if not isinstance(d,dict) or d.get('format')!=CHECKPOINT_FORMAT:
        raise ConfigError('%s is not a format %d checkpoint' % (path,CHECKPOINT_FORMAT))
    schema = FeatureSchema.fromDict(d['schema'])
    grid = TimeGrid(d['edges'])
    backboneCfg = BackboneConfig.fromDict(d['backbone'])
    config = TrainConfig.fromDict(d['train'])
    model = buildModel(schema,backboneCfg,d['head'],d['experts'],grid.m,config)
    model.load_state_dict(d['state'])
    trained = TrainedModel(model,schema,grid,backboneCfg,config,[tuple(h) for h in d['history']],d['bestEpoch'],d['split'])
    trained.extra = d['extra']
    return trained

class GradCheckReport:
    def __init__(self,head,errors,epsilon):
        self.head = head
        self.errors = errors
        self.epsilon = epsilon

    @property
    def maxError(self):
        return max(self.errors.values()) if self.errors else 0.0

    def passed(self,tol=1e-4):
        return self.maxError<tol

    def __repr__(self):
        return 'GradCheckReport(%s, max rel err %.3g)' % (self.head,self.maxError)

def _tinyData(seed,m,batch):
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(continuous=['a','b','c'],categorical=['k'],levels={'k':['u','v']})
    event = rng.integers(0,2,batch)
    event[:2] = (1,0)
    return schema, Batch(torch.as_tensor(rng.standard_normal((batch,3))),
            torch.as_tensor(rng.integers(0,3,(batch,1))),
            torch.as_tensor(rng.integers(0,m,batch)),
            torch.as_tensor(event))

def gradCheck(head,seed=0,epsilon=1e-5,h=8,n=None,m=6,batch=4,lambdaLb=0.01):
    '''max relative error per parameter between reverse-mode and central differences'''
    if n is None:
        n = 4 if head=='personalized' else 2
    if h>16 or n>4 or m>8 or batch>4:
        raise ConfigError('gradient checks need a tiny config (h <= 16, n <= 4, m <= 8, batch <= 4)')
    schema, data = _tinyData(seed,m,batch)
    model = buildModel(schema,BackboneConfig(hidden_dim=h,num_layers=2),head,n,m,TrainConfig(seed=seed))
    if hasattr(model.head,'polish'):
        model.head.polish = True #central differences resolve below the bisection step
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(0.3*torch.randn(p.shape,generator=gen,dtype=p.dtype))
    _, grads = computeGradients(model,data,lambdaLb)
    errors = {}
    with torch.no_grad():
        for name,p in model.named_parameters():
            flat = p.view(-1)
            a = grads[name].reshape(-1)
            worst = 0.0
            for i in range(flat.numel()):
                v = float(flat[i])
                flat[i] = v+epsilon
                up = float(modelLoss(model,data,lambdaLb))
                flat[i] = v-epsilon
                down = float(modelLoss(model,data,lambdaLb))
                flat[i] = v
                fd = (up-down)/(2*epsilon)
                ai = float(a[i])
                worst = max(worst,abs(ai-fd)/max(abs(ai),abs(fd),1e-6))
            errors[name] = worst
    return GradCheckReport(head,errors,epsilon)
