# vim: ts=4 et sw=4 sts=4 :

__version__ = "0.1.0"
