#!/usr/bin/env python3
# vim: ts=4 et sw=4 sts=4 :

from __future__ import with_statement, print_function

from setuptools import setup
import os, sys

pkg_root = os.path.abspath(os.path.dirname(__file__))
readme_rst = os.path.join( pkg_root, "README.rst" )
remove_rst = False

def getVersion():
    init = os.path.join( pkg_root, "patchcir", "__init__.py" )
    with open(init, 'r') as init_file:
        for line in init_file:
            if line.startswith("__version__"):
                return line.split('=')[1].strip().strip('"\'')
    raise RuntimeError("no __version__ in {}".format(init))

def getLongDesc():
    global remove_rst

    if not os.path.exists(readme_rst):
        # generate a restructured text long description from the markdown
        # readme, if pandoc is around
        import subprocess
        pandoc = "/usr/bin/pandoc"
        if not os.path.exists(pandoc):
            print("Can't generate RST readme from MD readme, because pandoc isn't installed. Skipping long description.", file = sys.stderr)
            return "no long description available"
        subprocess.check_call(
            [ pandoc, "-f", "markdown", "-t", "rst", "-o", "README.rst", "README.md" ],
            shell = False,
            close_fds = True
        )
        remove_rst = True

    with open(readme_rst, 'r') as rst_file:
        long_desc = rst_file.read()

    return long_desc

long_desc = getLongDesc()

try:

    setup(
        name = 'patch.cir',
        version = getVersion(),
        description = 'patch.cir computes channel impulse responses and bit error rates for diffusive '
                      'molecular communication towards a receiver covered by absorbing patches',
        long_description = long_desc,
        license = 'GPL2',
        keywords = 'molecular communication diffusion channel impulse response receptors',
        packages = ['patchcir'],
        python_requires = '>=3.8',
        install_requires = ['numpy>=1.20', 'scipy>=1.9'],
        extras_require = {
            # colored terminal output, falls back to plain text without it
            'color': ['termcolor']
        },
        data_files = [
            # template configuration, copy to ~/.config/patch-cir.ini to use
            ('share/patch-cir', ['etc/patch-cir.ini'])
        ],
        test_suite = 'tests',
        classifiers = [
            'Intended Audience :: Science/Research',
            'License :: OSI Approved :: GNU General Public License v2 (GPLv2)',
            'Programming Language :: Python :: 3.8',
            'Topic :: Scientific/Engineering :: Physics'
        ],
        scripts = [ 'bin/patchcir' ]
    )
finally:
    try:
        if remove_rst:
            os.remove(readme_rst)
    except:
        pass
