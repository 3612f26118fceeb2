# -*- coding: utf-8 -*-
#
# survmoe documentation build configuration file.

import sys, os

sys.path.insert(0, os.path.abspath('..'))
import survmoe

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.doctest', 'sphinx.ext.coverage', 'sphinx.ext.mathjax']
source_suffix = '.rst'
master_doc = 'index'

project = u'survmoe'
copyright = u'2026, the survmoe contributors'
release = survmoe.VERSION
version = '.'.join(release.split('.')[:2])

exclude_patterns = ['_build']
pygments_style = 'sphinx'
autodoc_mock_imports = ['torch', 'lifelines']

html_theme = 'default'
htmlhelp_basename = 'survmoedoc'

latex_documents = [
  ('index', 'survmoe.tex', u'survmoe Documentation',
   u'the survmoe contributors', 'manual'),
]
man_pages = [
    ('index', 'survmoe', u'survmoe Documentation',
     [u'the survmoe contributors'], 1)
]
