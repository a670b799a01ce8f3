# vpal documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

# The package lives under src/; autodoc imports it from there.
sys.path.insert(0, os.path.abspath(os.path.join('..', '..', 'src')))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.napoleon',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
}

templates_path = ['ntemplates']
source_suffix = '.rst'
master_doc = 'index'

project = 'vpal'
copyright = '2026, vpal developers'

# The short X.Y version.
version = '1.0'
# The full version, including alpha/beta/rc tags.
release = '1.0.0'

exclude_patterns = []
pygments_style = 'sphinx'

# Matrix arguments are named after their symbols (L, B, X).
napoleon_google_docstring = True
napoleon_numpy_docstring = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'nature'
html_static_path = ['nstatic']
htmlhelp_basename = 'vpaldoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}

latex_documents = [
  ('index', 'vpal.tex', 'vpal Documentation',
   'vpal developers', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'vpal', 'vpal Documentation',
     ['vpal developers'], 1)
]
