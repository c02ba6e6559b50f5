# Sphinx configuration for the torchtrack documentation.

import os
import sys

import pytorch_sphinx_theme

sys.path.insert(0, os.path.abspath("../.."))

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx_copybutton",
]

napoleon_use_ivar = True
napoleon_numpy_docstring = False
napoleon_google_docstring = True

project = "torchtrack"

# TORCHTRACK_VERSION_DOCS is a git ref such as refs/tags/v0.1.0
torchtrack_version_docs = os.environ.get("TORCHTRACK_VERSION_DOCS", None)
version = release = "main"
if torchtrack_version_docs and torchtrack_version_docs.startswith("refs/tags/v"):
    version = ".".join(torchtrack_version_docs.split("/")[-1].lstrip("v").split(".")[:2])

html_title = " ".join((project, version, "documentation"))
source_suffix = [".rst"]
master_doc = "index"
copyright = "2024-present, torchtrack Contributors"
author = "torchtrack Contributors"
language = "en"
exclude_patterns = []
pygments_style = "sphinx"

html_theme = "pytorch_sphinx_theme"
html_theme_path = [pytorch_sphinx_theme.get_html_theme_path()]
html_theme_options = {
    "collapse_navigation": False,
    "display_version": True,
    "navigation_with_keys": True,
}
htmlhelp_basename = "torchtrackdoc"

autosummary_generate = True

intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "torch": ("https://pytorch.org/docs/stable/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}
