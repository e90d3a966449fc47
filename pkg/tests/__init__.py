# vim: ts=4 et sw=4 sts=4 :
