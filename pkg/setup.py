#see LICENSE.txt for license details
try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup
import os, sys

if __name__=='__main__':
    pkgDir=os.path.dirname(sys.argv[0])
    if not pkgDir:
        pkgDir=os.getcwd()
    if not os.path.isabs(pkgDir):
        pkgDir=os.path.abspath(pkgDir)
    sys.path.insert(0,pkgDir)
    os.chdir(pkgDir)
    if len(sys.argv)>=2 and sys.argv[1]=='test':
        import subprocess
        def specialOption(n):
            v = 0
            while n in sys.argv:
                v += 1
                sys.argv.remove(n)
            return v
        failfast = specialOption('--failfast')
        verboseTests = specialOption('--verbose-tests')
        acceptance = specialOption('--acceptance')
        if len(sys.argv)!=2:
            raise ValueError('test may only be used alone sys.argv[1:]=%s' % repr(sys.argv[1:]))
        os.chdir(os.path.join(pkgDir,'test'))
        cli = [sys.executable, 'testall.py']
        if verboseTests:
            cli.append('--verbosity=2')
        if failfast:
            cli.append('--failfast')
        env = dict(os.environ)
        if acceptance:
            env['SURVMOE_ACCEPTANCE'] = '1'
        r = subprocess.call(cli,stderr=subprocess.STDOUT,env=env,timeout=4*3600)
        sys.exit(f'!!!!! testall.py --> {r} !!!!!' if r else r)

    import survmoe
    version = survmoe.VERSION

    setup(name='survmoe',
        version=version,
        license="BSD license (see LICENSE.txt for details)",
        license_files=('LICENSE.txt',),
        classifiers = [
            'Development Status :: 4 - Beta',
            'Intended Audience :: Science/Research',
            'License :: OSI Approved :: BSD License',
            'Topic :: Scientific/Engineering :: Artificial Intelligence',
            'Topic :: Scientific/Engineering :: Medical Science Apps.',
            'Programming Language :: Python :: 3',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.10',
            'Programming Language :: Python :: 3.11',
            'Programming Language :: Python :: 3.12',
            ],
        description='survmoe - discrete-time survival mixtures of experts',
        long_description='Fixed, Adjustable and Personalized mixture-of-experts survival heads over a '
                'multi-task logistic regression likelihood, with IPCW metrics and routing cluster reports.',
        packages=['survmoe'],
        python_requires='>=3.9',
        install_requires=[
            'torch>=1.13',
            'numpy>=1.22',
            'pandas>=1.4',
            'scikit-learn>=1.1',
            'lifelines>=0.27',
            ],
        extras_require=dict(test=['scipy>=1.8']),
        entry_points = dict(
                        console_scripts = [
                                'survmoe=survmoe.cli:main',
                                ],
                            ),
        )
