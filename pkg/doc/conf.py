# Sphinx configuration for the gatedts documentation.
# See http://www.sphinx-doc.org/en/master/config for the available options.

import os
import sys
sys.path.insert(0, os.path.abspath('..'))
import gatedts


# -- Project information -----------------------------------------------------

project = 'gatedts'
copyright = '2021-2025, National Research Foundation (SARAO)'
author = 'National Research Foundation (SARAO)'

# Short X.Y version and full release string, both taken from katversion
version = '.'.join(gatedts.__version__.split('.')[:2])
release = gatedts.__version__

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.mathjax',
    'sphinx.ext.intersphinx',
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon'
]
# numpydoc sections only
napoleon_google_docstring = False
napoleon_use_rtype = False

master_doc = 'index'
exclude_patterns = ['_build']

# -- HTML output -------------------------------------------------------------

html_theme = 'sphinx_rtd_theme'

# -- Extensions --------------------------------------------------------------

autodoc_member_order = 'bysource'
autodoc_default_options = {'members': True, 'show-inheritance': True}

intersphinx_mapping = {'python': ('https://docs.python.org/3', None),
                       'numpy': ('https://numpy.org/doc/stable', None),
                       'scipy': ('https://docs.scipy.org/doc/scipy', None)}
