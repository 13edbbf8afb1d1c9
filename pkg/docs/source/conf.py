# Configuration file for the Sphinx documentation builder.

# Project Information
project = "zsight"
copyright = "2024, zsight developers"
author = "zsight developers"


# General Configuration
extensions = [
    "sphinx.ext.autodoc",  # Auto documentation from docstrings
    "sphinx.ext.napoleon",  # Support for NumPy and Google style docstrings
    "sphinx.ext.mathjax",  # Estimator formulas in docstrings
    "sphinx_copybutton",  # Copy button for code blocks
    "sphinx_design",  # Boostrap design components
]

templates_path = []
exclude_patterns = []
fixed_sidebar = True


# HTML Output Options

# See https://sphinx-themes.org/ for more
html_theme = "pydata_sphinx_theme"
html_title = "zsight"
html_static_path = []

html_show_sourcelink = False
html_theme_options = {
    "show_nav_level": 2,
    "navbar_end": ["navbar-icon-links"],
    "navbar_align": "left",
}

html_context = {"default_mode": "auto"}

autodoc_member_order = "bysource"
