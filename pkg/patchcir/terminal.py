# vim: ts=4 et sw=4 sts=4 :

# console output of the command line interface. Colors are only used when
# termcolor is installed and the target stream is a terminal, so redirected
# tables stay plain text.

import sys

# 3rd party
try:
    import termcolor
    have_termcolor = True
except ModuleNotFoundError:
    have_termcolor = False


def _isTerminal(stream):
    try:
        return stream.isatty()
    except (AttributeError, ValueError):
        return False


def print_colored(*args, **kwargs):
    """print() wrapper that supports a color='mycolor' parameter."""
    color = kwargs.pop("color", None)
    stream = kwargs.get("file", None) or sys.stdout

    if not color or not have_termcolor or not _isTerminal(stream):
        print(*args, **kwargs)
        return

    sep = kwargs.pop("sep", ' ')
    text = sep.join(str(arg) for arg in args)
    print(termcolor.colored(text, color), **kwargs)


def printe(*args, **kwargs):
    """Shortcut function to print to stderr."""
    kwargs["file"] = sys.stderr
    print(*args, **kwargs)


def printe_colored(*args, **kwargs):
    kwargs["file"] = sys.stderr
    print_colored(*args, **kwargs)


def printError(*args, **kwargs):
    kwargs["color"] = "red"
    printe_colored(*args, **kwargs)


def printWarning(*args, **kwargs):
    kwargs["color"] = "yellow"
    printe_colored(*args, **kwargs)


def printTable(header, rows, file=None):
    """Prints rows of values right aligned below `header`."""
    cells = [[str(h) for h in header]] + [
        ["{:.6g}".format(v) if isinstance(v, float) else str(v) for v in row]
        for row in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    for idx, row in enumerate(cells):
        line = "  ".join(val.rjust(width) for val, width in zip(row, widths))
        if idx == 0:
            print_colored(line, color="cyan", file=file)
        else:
            print(line, file=file)
