#see LICENSE.txt for license details

"""survmoe command line front end."""
import os, sys, json, time, glob, tempfile, argparse, warnings
from dataclasses import asdict
import numpy as np
import pandas as pd
import torch
from . import VERSION, SurvMoeError, ConfigError, DataError, NumericalError, UsageError, getMd5, pel, vpel
from .data import (SyntheticSpec, SYNTHETIC_KEYS, generateSynthetic, writeCsv, writeLabels, writeSchema,
        readSchema, loadCsv, loadLabels, split, fitStandardizer, applyStandardizer, fingerprint)
from .training import (BackboneConfig, TrainConfig, train, saveCheckpoint, loadCheckpoint, predictPmf,
        countParameters, gradCheck, encodeDataset, evaluateLoss)
from .metrics import fitCensoring, evaluatePredictions
from .clusters import (top1Assign, routingMatrix, contingencyTable, habermanZ, pairwiseAri,
        kmByCluster, clusterQuantiles)

USAGE = """
survmoe COMMAND [options]

    gen-data        write the synthetic log-normal dataset
                    (records.csv, labels.csv, schema.json)
    train           train one head on --data/--schema
                    (checkpoint.pt, history.csv)
    eval            metrics of --checkpoint on a split of --data
                    (metrics.json, metrics_per_time.csv)
    sweep-experts   train every head x expert count x seed
                    against an mtlr reference (sweep.csv, sweep_summary.csv)
    cluster-report  routing clusters of one or more checkpoints
                    (cluster_report.json and plot-ready CSV tables)
    grad-check      finite-difference check of every head's gradients

Every command writes manifest.json next to its outputs.  Outputs go to --out,
else $SURVMOE_OUT, else the current directory.  Settings resolve as defaults <
--preset < --config FILE < explicit flags.

exit codes: 0 success, 1 usage/config/data error, 2 numerical failure
"""

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
SPLIT_FRACTIONS = (0.8,0.1,0.1)
SWEEP_HEADS = ('fixed','adjustable','personalized')
REFERENCE_HEAD = 'mtlr'
SWEEP_METRICS = ('test_loss','c_harrell','ece','brier_50')
SWEEP_HIDDEN_DIM = 120
GRAD_TOL = 1e-4

def _preset(h,l,n,lr,head):
    return dict(head=head,hidden_dim=h,num_layers=l,experts=n,learning_rate=lr)

#hidden dim, layers, experts, learning rate per dataset and head
PRESETS = {
    'mnist-fixed': _preset(208,2,10,5e-4,'fixed'),
    'mnist-adjustable': _preset(186,2,10,5e-4,'adjustable'),
    'mnist-personalized': _preset(160,1,10,5e-4,'personalized'),
    'mnist-mtlr': _preset(176,2,0,5e-4,'mtlr'),
    'support2-fixed': _preset(176,2,10,5e-3,'fixed'),
    'support2-adjustable': _preset(186,2,10,5e-3,'adjustable'),
    'support2-personalized': _preset(128,1,8,5e-4,'personalized'),
    'support2-mtlr': _preset(176,2,0,5e-4,'mtlr'),
    'sepsis-fixed': _preset(176,2,10,5e-4,'fixed'),
    'sepsis-adjustable': _preset(186,2,10,5e-4,'adjustable'),
    'sepsis-personalized': _preset(128,1,8,5e-4,'personalized'),
    'sepsis-mtlr': _preset(176,2,0,5e-4,'mtlr'),
    }

#flag dest -> resolved setting
_FLAG_KEYS = dict(head='head',experts='experts',hidden_dim='hidden_dim',layers='num_layers',
        lr='learning_rate',batch_size='batch_size',lambda_lb='lambda_lb',kappa_init='kappa_init',
        bins='time_bins',seed='seed',max_epochs='max_epochs',patience='patience')
_GEN_FLAGS = dict(class_means='classMeans',class_stds='classStds',censor_rate='censorRate',
        samples_per_class='samplesPerClass',feature_dim='featureDim',radius='radius',seed='seed')

class ArgumentParser(argparse.ArgumentParser):
    def error(self,message):
        raise UsageError('%s: %s' % (self.prog,message))

def readConfig(path,valid):
    '''JSON object of settings; keys outside valid are a ConfigError'''
    try:
        with open(path) as f:
            d = json.load(f)
    except (OSError,ValueError) as e:
        raise ConfigError('cannot read config %s: %s' % (path,e))
    if not isinstance(d,dict):
        raise ConfigError('config %s must hold a JSON object' % path)
    bad = sorted(set(d)-set(valid))
    if bad:
        raise ConfigError('unknown config key(s) %s in %s, valid keys are %s' % (', '.join(bad),path,', '.join(sorted(valid))))
    return d

def resolveSettings(args):
    '''(head, experts, BackboneConfig, TrainConfig) after defaults < preset < config file < flags'''
    s = dict(head='fixed',experts=10)
    s.update(asdict(BackboneConfig()))
    s.update(asdict(TrainConfig()))
    valid = set(s)
    if getattr(args,'preset',None):
        if args.preset not in PRESETS:
            raise ConfigError('unknown preset %r, valid presets are %s' % (args.preset,', '.join(sorted(PRESETS))))
        s.update(PRESETS[args.preset])
    if getattr(args,'config',None):
        s.update(readConfig(args.config,valid))
    for dest,key in _FLAG_KEYS.items():
        v = getattr(args,dest,None)
        if v is not None:
            s[key] = v
    head, experts = s.pop('head'), s.pop('experts')
    backbone = BackboneConfig(**{k:s.pop(k) for k in ('hidden_dim','num_layers','embedding_dims')})
    config = TrainConfig(**s)
    config.validate()
    backbone.validate(head,experts)
    return head, experts, backbone, config

def outDir(args):
    d = args.out or os.environ.get('SURVMOE_OUT') or '.'
    os.makedirs(d,exist_ok=True)
    return d

def guardOutputs(paths,force):
    existing = [p for p in paths if os.path.exists(p)]
    if existing and not force:
        raise UsageError('refusing to overwrite %s, use --force' % ', '.join(existing))

def writeJson(path,obj):
    '''atomic: write a temporary file in the same directory then rename'''
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix='.tmp-',suffix='.json',dir=d)
    try:
        with os.fdopen(fd,'w') as f:
            json.dump(obj,f,indent=2,sort_keys=True)
            f.write('\n')
        os.replace(tmp,path)
    except BaseException:
        if os.path.exists(tmp): os.remove(tmp)
        raise

def artifactVersion():
    here = os.path.dirname(os.path.abspath(__file__))
    parts = []
    for fn in sorted(glob.glob(os.path.join(here,'*.py'))):
        with open(fn,'rb') as f:
            parts.append(f.read())
    return '%s+%s' % (VERSION,getMd5(*parts)[:12])

class Run:
    '''collects the manifest of one command invocation'''
    def __init__(self,command,argv,out):
        self.out = out
        self.started = time.time()
        self.manifest = dict(command=command,argv=list(argv),version=artifactVersion(),
                outputs=[],seeds=[],data=None,config=None,metrics=None)

    def path(self,name):
        p = os.path.join(self.out,name)
        self.manifest['outputs'].append(p)
        return p

    def dataset(self,path,ds):
        rows, digest = fingerprint(ds)
        self.manifest['data'] = dict(path=path,rows=rows,md5=digest)

    def finish(self):
        self.manifest['runtime_seconds'] = round(time.time()-self.started,3)
        writeJson(os.path.join(self.out,'manifest.json'),self.manifest)

def _settingsDict(head,experts,backbone,config):
    return dict(head=head,experts=experts,backbone=asdict(backbone),train=asdict(config))

def _loadSplits(dataPath,schema,fractions,seed,labelsPath=None):
    if not dataPath:
        raise UsageError('--data is required')
    ds = loadCsv(dataPath,schema)
    if labelsPath:
        ds = loadLabels(labelsPath,ds)
    return ds, split(ds,fractions,seed)

def _standardize(schema,parts):
    return [applyStandardizer(schema,p) for p in parts]

def syntheticSettings(args):
    '''SyntheticSpec after defaults < --config FILE < explicit flags'''
    s = SyntheticSpec().toDict()
    if args.config:
        s.update(readConfig(args.config,SYNTHETIC_KEYS))
    for dest,key in _GEN_FLAGS.items():
        v = getattr(args,dest,None)
        if v is not None:
            s[key] = v
    return SyntheticSpec.fromDict(s)

def cmdGenData(args,run):
    spec = syntheticSettings(args)
    names = ('records.csv','labels.csv','schema.json')
    guardOutputs([os.path.join(run.out,n) for n in names+('manifest.json',)],args.force)
    ds = generateSynthetic(spec)
    records, labels, schema = (run.path(n) for n in names)
    writeCsv(ds,records)
    writeLabels(ds,labels)
    writeSchema(ds.schema,schema)
    run.manifest['config'] = spec.toDict()
    run.manifest['seeds'] = [spec.seed]
    run.dataset(records,ds)
    run.manifest['metrics'] = dict(records=len(ds),censored=int((ds.event==0).sum()))
    vpel('wrote %d records to %s' % (len(ds),records),args.verbose)
    return EXIT_OK

def _trainOne(args,head,experts,backbone,config,run=None):
    if not args.schema:
        raise UsageError('--schema is required')
    ds, (tr,va,te) = _loadSplits(args.data,readSchema(args.schema),SPLIT_FRACTIONS,args.split_seed)
    std = fitStandardizer(tr)
    tr, va, te = _standardize(std,(tr,va,te))
    trained = train(tr,va,backbone,head,experts,config,verbose=args.verbose)
    trained.split = dict(seed=args.split_seed,fractions=list(SPLIT_FRACTIONS),data=list(fingerprint(ds)))
    if run:
        run.dataset(args.data,ds)
    return trained, te

def cmdTrain(args,run):
    head, experts, backbone, config = resolveSettings(args)
    names = ('checkpoint.pt','history.csv')
    guardOutputs([os.path.join(run.out,n) for n in names+('manifest.json',)],args.force)
    run.manifest['config'] = _settingsDict(head,experts,backbone,config)
    run.manifest['seeds'] = [config.seed]
    trained, _ = _trainOne(args,head,experts,backbone,config,run)
    ckpt, hist = (run.path(n) for n in names)
    saveCheckpoint(trained,ckpt)
    trained.writeHistory(hist)
    run.manifest['metrics'] = dict(best_epoch=trained.bestEpoch,best_val_loss=trained.bestValLoss,
            epochs=len(trained.history),parameters=countParameters(trained))
    vpel('best epoch %d val loss %.6f' % (trained.bestEpoch,trained.bestValLoss),args.verbose)
    return EXIT_OK

def _checkCompatible(args,trained,ds):
    if args.bins is not None and args.bins!=trained.grid.m:
        raise DataError('checkpoint has a %d bin time grid, --bins asks for %d' % (trained.grid.m,args.bins))
    if ds.schema.continuous!=trained.schema.continuous or ds.schema.categorical!=trained.schema.categorical:
        raise DataError('data columns do not match the checkpoint schema')

def _splitKey(trained):
    sp = trained.split
    return sp.get('seed',0), tuple(sp.get('fractions',SPLIT_FRACTIONS)), tuple(sp.get('data') or ())

def _checkpointData(args,trained):
    '''(dataset, raw --split part) re-derived exactly as the checkpoint was trained'''
    seed, fractions, data = _splitKey(trained)
    ds, parts = _loadSplits(args.data,trained.schema,fractions,seed,getattr(args,'labels',None))
    _checkCompatible(args,trained,ds)
    if data and fingerprint(ds)!=data:
        rows, digest = fingerprint(ds)
        raise DataError('%s (%d rows, md5 %s) is not the data the checkpoint was trained on (%d rows, md5 %s)'
                % (args.data,rows,digest,data[0],data[1]))
    return ds, parts[dict(train=0,val=1,test=2)[args.split]]

def _checkpointSplit(args,trained):
    ds, part = _checkpointData(args,trained)
    return ds, applyStandardizer(trained.schema,part)

def _checkpoints(args):
    if not args.checkpoint:
        raise UsageError('--checkpoint is required')
    return [loadCheckpoint(p) for p in args.checkpoint]

def cmdEval(args,run):
    names = ('metrics.json','metrics_per_time.csv')
    guardOutputs([os.path.join(run.out,n) for n in names+('manifest.json',)],args.force)
    trained = _checkpoints(args)[0]
    ds, part = _checkpointSplit(args,trained)
    run.dataset(args.data,ds)
    pmf, _ = predictPmf(trained,part)
    metrics = evaluatePredictions(pmf,part.time,part.event,trained.grid,fitCensoring(part.time,part.event))
    metrics['split'] = args.split
    metrics['loss'] = evaluateLoss(trained.model,encodeDataset(part,trained.grid,trained.config.dtype))
    mj, mc = (run.path(n) for n in names)
    writeJson(mj,metrics)
    pd.DataFrame(dict(time=trained.grid.evalTimes,ece=metrics['ece_per_time'],
            brier=metrics['brier_per_time'])).to_csv(mc,index=False,float_format='%.17g')
    run.manifest['config'] = _settingsDict(trained.head,trained.experts,trained.backboneCfg,trained.config)
    run.manifest['seeds'] = [trained.config.seed]
    run.manifest['metrics'] = {k:v for k,v in metrics.items() if not isinstance(v,list)}
    vpel('%s: C %.4f  C-ipcw %.4f  ECE %.4f  Brier50 %.4f' % (args.split,metrics['c_harrell'],
            metrics['c_ipcw'],metrics['ece'],metrics['brier_50']),args.verbose)
    return EXIT_OK

def _sweepCell(args,head,n,seed):
    row = dict(head=head,experts=n,seed=seed,status='ok',best_epoch=np.nan,error='')
    row.update((k,np.nan) for k in SWEEP_METRICS)
    args.head, args.experts, args.seed = head, n, seed
    try:
        h, e, backbone, config = resolveSettings(args)
        trained, te = _trainOne(args,h,e,backbone,config)
        pmf, _ = predictPmf(trained,te)
        m = evaluatePredictions(pmf,te.time,te.event,trained.grid,fitCensoring(te.time,te.event))
        row.update(test_loss=evaluateLoss(trained.model,encodeDataset(te,trained.grid,config.dtype)),
                c_harrell=m['c_harrell'],ece=m['ece'],brier_50=m['brier_50'],best_epoch=trained.bestEpoch)
    except (SurvMoeError,RuntimeError) as err:
        row.update(status='failed',error=str(err))
        warnings.warn('sweep cell %s n=%d seed=%d failed: %s' % (head,n,seed,err))
    vpel('%-12s n=%-3d seed=%-3d %s %s' % (head,n,seed,row['status'],row['test_loss']),args.verbose)
    return row

def sweepTables(rows):
    '''(per-cell frame with *_delta_vs_mtlr columns, per head and expert count seed means)

    Deltas are against the mtlr row of the same seed; a missing or failed
    reference leaves them NaN.
    '''
    df = pd.DataFrame(rows)
    ref = df[(df['head']==REFERENCE_HEAD) & (df['status']=='ok')].set_index('seed')
    deltas = []
    for k in SWEEP_METRICS:
        df[k+'_delta_vs_mtlr'] = df[k]-df['seed'].map(ref[k])
        deltas.append(k+'_delta_vs_mtlr')
    ok = df[df['status']=='ok']
    g = ok.groupby(['head','experts'],sort=False)
    summary = g[list(SWEEP_METRICS)+deltas].mean()
    summary.insert(0,'seeds',g.size())
    return df, summary.reset_index()

def cmdSweepExperts(args,run):
    if not (args.data and args.schema):
        raise UsageError('--data and --schema are required')
    if args.min<1 or args.max<args.min:
        raise ConfigError('need 1 <= --min <= --max, got %d..%d' % (args.min,args.max))
    heads = [h for h in (args.heads or SWEEP_HEADS) if h!=REFERENCE_HEAD]
    seeds = args.seeds or [0]
    names = ('sweep.csv','sweep_summary.csv')
    guardOutputs([os.path.join(run.out,n) for n in names+('manifest.json',)],args.force)
    if args.hidden_dim is None and not args.preset and not args.config:
        args.hidden_dim = SWEEP_HIDDEN_DIM
    #the reference head is trained once per seed on the same split
    rows = [_sweepCell(args,REFERENCE_HEAD,0,seed) for seed in seeds]
    for head in heads:
        for n in range(args.min,args.max+1):
            for seed in seeds:
                rows.append(_sweepCell(args,head,n,seed))
    df, summary = sweepTables(rows)
    cells, means = (run.path(n) for n in names)
    df.to_csv(cells,index=False,float_format='%.17g')
    summary.to_csv(means,index=False,float_format='%.17g')
    run.dataset(args.data,loadCsv(args.data,readSchema(args.schema)))
    run.manifest['config'] = dict(heads=[REFERENCE_HEAD]+heads,min=args.min,max=args.max,
            hidden_dim=args.hidden_dim,preset=args.preset)
    run.manifest['seeds'] = list(seeds)
    run.manifest['metrics'] = dict(cells=len(rows),failed=sum(r['status']!='ok' for r in rows))
    return EXIT_OK

def cmdClusterReport(args,run):
    checkpoints = _checkpoints(args)
    if args.ari and len(checkpoints)<2:
        raise UsageError('cross-seed ARI needs at least two --checkpoint files')
    names = ('cluster_report.json','km_by_cluster.csv','cluster_quantiles.csv','routing_matrix.csv')
    guardOutputs([os.path.join(run.out,n) for n in names+('manifest.json',)],args.force)
    for p,trained in zip(args.checkpoint,checkpoints):
        if trained.head=='mtlr':
            raise UsageError('%s has an mtlr head, which has no router' % p)
        if _splitKey(trained)!=_splitKey(checkpoints[0]):
            raise DataError('%s and %s were trained on different data or splits (split seeds %s and %s); '
                    'their clusters cover different records' % (args.checkpoint[0],p,
                    _splitKey(checkpoints[0])[0],_splitKey(trained)[0]))
    ds, raw = _checkpointData(args,checkpoints[0])
    assignments = []
    for trained in checkpoints:
        _checkCompatible(args,trained,ds)
        _, alpha = predictPmf(trained,applyStandardizer(trained.schema,raw))
        assignments.append(top1Assign(alpha))
    trained, a = checkpoints[0], assignments[0]
    part = applyStandardizer(trained.schema,raw)
    run.dataset(args.data,ds)
    n = trained.experts
    report = dict(split=args.split,records=len(part),experts=n,
            sizes=np.bincount(a.expert,minlength=n).tolist(),assignments=a.expert.tolist())
    kms = kmByCluster(a,part.time,part.event,n)
    t = trained.grid.evalTimes
    kmRows = [dict(cluster=k,size=c.size,time=float(tt),survival=float(s)) for k,c in kms.items() for tt,s in zip(t,c.curve(t))]
    report['omitted_clusters'] = [k for k in range(n) if k not in kms]
    pd.DataFrame(kmRows,columns=['cluster','size','time','survival']).to_csv(run.path('km_by_cluster.csv'),index=False,float_format='%.17g')
    clusterQuantiles(a,part.continuous,part.schema.continuous).to_csv(run.path('cluster_quantiles.csv'),index=False,float_format='%.17g')
    if part.labels is not None:
        rm = routingMatrix(a,part.labels,n,int(part.labels.max())+1)
        report['routing_matrix'] = rm.matrix.tolist()
        report['purity'] = rm.purity
        pd.DataFrame(rm.matrix).rename_axis('expert').to_csv(run.path('routing_matrix.csv'),float_format='%.17g')
    z = {}
    for j,col in enumerate(part.schema.categorical):
        hz = habermanZ(contingencyTable(a,part.categorical[:,j],n,len(part.schema.levels[col])))
        lv = part.schema.levels[col]
        z[col] = dict(flags=[dict(cluster=c,level=lv[k],z=v) for c,k,v in hz.flags],
                skipped=[dict(cluster=c,level=lv[k]) for c,k in hz.skipped])
    report['haberman'] = z
    if len(assignments)>1:
        pairs, mean = pairwiseAri(assignments)
        report['ari'] = dict(pairs=[dict(a=i,b=j,ari=v) for i,j,v in pairs],mean=mean)
    writeJson(run.path('cluster_report.json'),report)
    run.manifest['seeds'] = [c.config.seed for c in checkpoints]
    run.manifest['metrics'] = {k:report[k] for k in ('purity',) if k in report}
    if 'ari' in report: run.manifest['metrics']['ari_mean'] = report['ari']['mean']
    return EXIT_OK

def cmdGradCheck(args,run):
    heads = args.heads or list(SWEEP_HEADS)
    eps = args.epsilon
    tol = args.tol if args.tol is not None else GRAD_TOL*max(1.0,eps/1e-5)
    seed = args.seed if args.seed is not None else 0
    results = {}
    ok = True
    for head in heads:
        r = gradCheck(head,seed=seed,epsilon=eps)
        results[head] = dict(max_rel_err=r.maxError,passed=r.passed(tol),blocks=r.errors)
        ok = ok and r.passed(tol)
        pel('%-12s max rel err %.3e %s' % (head,r.maxError,'ok' if r.passed(tol) else 'FAILED'))
    writeJson(run.path('grad_check.json'),dict(epsilon=eps,tol=tol,heads=results))
    run.manifest['config'] = dict(heads=heads,epsilon=eps,tol=tol)
    run.manifest['seeds'] = [seed]
    run.manifest['metrics'] = {h:results[h]['max_rel_err'] for h in heads}
    return EXIT_OK if ok else EXIT_NUMERICAL

def _addCommon(p,data=True):
    p.add_argument('--out',help='output directory (default $SURVMOE_OUT or .)')
    p.add_argument('--force',action='store_true',help='overwrite existing outputs')
    p.add_argument('-v','--verbose',action='count',default=None)
    if data:
        p.add_argument('--data',help='records CSV')
        p.add_argument('--schema',help='JSON schema naming the column roles')

def _addModel(p):
    p.add_argument('--preset',help='one of %s' % ', '.join(sorted(PRESETS)))
    p.add_argument('--config',help='JSON file of settings')
    p.add_argument('--hidden-dim',type=int)
    p.add_argument('--layers',type=int)
    p.add_argument('--lr',type=float)
    p.add_argument('--batch-size',type=int)
    p.add_argument('--lambda-lb',type=float)
    p.add_argument('--kappa-init',type=float)
    p.add_argument('--bins',type=int)
    p.add_argument('--max-epochs',type=int)
    p.add_argument('--patience',type=int)
    p.add_argument('--split-seed',type=int,default=0)

def _addSplit(p):
    p.add_argument('--checkpoint',action='append',help='checkpoint file, repeatable')
    p.add_argument('--split',choices=('train','val','test'),default='test')
    p.add_argument('--bins',type=int,help='expected number of time bins')

def makeParser():
    P = ArgumentParser(prog='survmoe',description='discrete-time survival mixtures of experts',
            epilog=USAGE,formatter_class=argparse.RawDescriptionHelpFormatter)
    P.add_argument('--version',action='version',version=VERSION)
    sub = P.add_subparsers(dest='command',metavar='COMMAND')

    p = sub.add_parser('gen-data',help='write the synthetic dataset')
    _addCommon(p,data=False)
    p.add_argument('--config',help='JSON file of synthetic data settings (%s)' % ', '.join(SYNTHETIC_KEYS))
    p.add_argument('--seed',type=int)
    p.add_argument('--censor-rate',type=float,help='default 0.15')
    p.add_argument('--samples-per-class',type=int,help='default 625')
    p.add_argument('--feature-dim',type=int,help='default 16')
    p.add_argument('--class-means',type=float,nargs='+',help='event-time mean per class')
    p.add_argument('--class-stds',type=float,nargs='+',help='event-time std per class')
    p.add_argument('--radius',type=float,help='class centre spread, default 3')

    p = sub.add_parser('train',help='train one model')
    _addCommon(p)
    _addModel(p)
    p.add_argument('--head')
    p.add_argument('--experts',type=int)
    p.add_argument('--seed',type=int)

    p = sub.add_parser('eval',help='evaluate a checkpoint')
    _addCommon(p)
    _addSplit(p)

    p = sub.add_parser('sweep-experts',help='train over a range of expert counts')
    _addCommon(p)
    _addModel(p)
    p.add_argument('--heads',nargs='+',choices=SWEEP_HEADS+('mtlr',))
    p.add_argument('--min',type=int,default=2)
    p.add_argument('--max',type=int,default=10)
    p.add_argument('--seeds',type=int,nargs='+')

    p = sub.add_parser('cluster-report',help='routing clusters of checkpoints')
    _addCommon(p)
    _addSplit(p)
    p.add_argument('--labels',help='ground-truth (id, class) CSV')
    p.add_argument('--ari',action='store_true',help='require cross-checkpoint ARI')

    p = sub.add_parser('grad-check',help='finite-difference gradient check')
    _addCommon(p,data=False)
    p.add_argument('--heads',nargs='+',choices=SWEEP_HEADS+('mtlr',))
    p.add_argument('--epsilon',type=float,default=1e-5)
    p.add_argument('--tol',type=float)
    p.add_argument('--seed',type=int)
    return P

COMMANDS = {
    'gen-data': cmdGenData,
    'train': cmdTrain,
    'eval': cmdEval,
    'sweep-experts': cmdSweepExperts,
    'cluster-report': cmdClusterReport,
    'grad-check': cmdGradCheck,
    }

def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = makeParser().parse_args(argv)
        if not args.command:
            raise UsageError('no command given'+USAGE)
        torch.set_num_threads(1)
        run = Run(args.command,argv,outDir(args))
        r = COMMANDS[args.command](args,run)
        run.finish()
        return r
    except NumericalError as e:
        sys.stderr.write('survmoe: numerical failure: %s\n' % e)
        return EXIT_NUMERICAL
    except SurvMoeError as e:
        sys.stderr.write('survmoe: %s\n' % e)
        return EXIT_USAGE

if __name__=='__main__':
    sys.exit(main())
