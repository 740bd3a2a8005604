# Sphinx configuration of the zoomstab documentation.
#
# Build with ``python setup.py build_html`` from the package directory.
import os
import sys
sys.path.insert(0, os.path.abspath('..'))

from zoomstab.__about__ import __author__, __version__  # noqa: E402

project = 'zoomstab'
copyright = '2026, ' + __author__
author = __author__
version = release = __version__
master_doc = 'index'

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.coverage',
              'sphinx.ext.napoleon', 'sphinx.ext.mathjax']
templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

html_theme = 'sphinx_rtd_theme'
html_static_path = []

# numpy-style sections render as field lists
napoleon_use_param = False
autodoc_member_order = 'bysource'
