#see LICENSE.txt for license details

## train the three mixture heads on a small synthetic set and print the headline metrics
def run(nExperts=10, epochs=30):
    import numpy as np
    from survmoe.data import SyntheticSpec, generateSynthetic, split, fitStandardizer, applyStandardizer
    from survmoe.training import BackboneConfig, TrainConfig, train, predictPmf
    from survmoe.metrics import evaluatePredictions, fitCensoring
    from survmoe.clusters import top1Assign, routingMatrix

    ds = generateSynthetic(SyntheticSpec(samplesPerClass=200, seed=1))
    tr, va, te = split(ds, seed=0)
    schema = fitStandardizer(tr)
    tr, va, te = [applyStandardizer(schema, p) for p in (tr, va, te)]
    for head in ('fixed', 'adjustable', 'personalized'):
        trained = train(tr, va, BackboneConfig(hidden_dim=60), head, nExperts,
                TrainConfig(max_epochs=epochs, time_bins=30, learning_rate=2e-3), verbose=0)
        pmf, alpha = predictPmf(trained, te)
        m = evaluatePredictions(pmf, te.time, te.event, trained.grid, fitCensoring(te.time, te.event))
        purity = routingMatrix(top1Assign(alpha), te.labels, nExperts, 10).purity
        print('%-13s C %.3f  C-ipcw %.3f  ECE %.4f  Brier50 %.4f  purity %.2f  experts used %d' % (
                head, m['c_harrell'], m['c_ipcw'], m['ece'], m['brier_50'], purity,
                len(np.unique(top1Assign(alpha).expert))))

if __name__=='__main__':
    run()
