"""S-expression reader shared by the .wat, .spec and .wlp file formats.

Atoms are returned as plain strings together with their source position;
consumers decide how to interpret them (keyword, number, identifier).
Line comments start with ';;' and run to end of line.
"""


class SexprError(Exception):
    def __init__(self, msg, line, col):
        super().__init__("%d:%d: %s" % (line, col, msg))
        self.msg = msg
        self.line = line
        self.col = col


class Atom(str):
    """A string atom carrying its source position."""

    line = 0
    col = 0

    def __new__(cls, text, line, col):
        self = super().__new__(cls, text)
        self.line = line
        self.col = col
        return self


class Node(list):
    """A parenthesized list carrying its source position."""

    line = 0
    col = 0

    def __new__(cls, items, line, col):
        self = super().__new__(cls)
        return self

    def __init__(self, items, line, col):
        super().__init__(items)
        self.line = line
        self.col = col


_DELIMS = "()\"; \t\r\n"


def _tokens(text):
    line, col = 1, 0
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 0
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c == ";":
            if i + 1 < n and text[i + 1] == ";":
                while i < n and text[i] != "\n":
                    i += 1
            else:
                raise SexprError("stray ';' (use ';;' for comments)", line, col + 1)
        elif c in "()":
            yield (c, line, col + 1)
            col += 1
            i += 1
        elif c == '"':
            start_line, start_col = line, col + 1
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise SexprError("unterminated string", start_line, start_col)
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise SexprError("unterminated string", start_line, start_col)
            yield ('"' + "".join(buf), start_line, start_col)
            col += j + 1 - i
            i = j + 1
        else:
            start = i
            start_col = col + 1
            while i < n and text[i] not in _DELIMS:
                i += 1
                col += 1
            yield (text[start:i], line, start_col)


def parse_all(text):
    """Parse a whole document into a list of top-level s-expressions."""
    stack = [Node([], 1, 1)]
    last_line, last_col = 1, 1
    for tok, line, col in _tokens(text):
        last_line, last_col = line, col
        if tok == "(":
            node = Node([], line, col)
            stack.append(node)
        elif tok == ")":
            if len(stack) == 1:
                raise SexprError("unbalanced ')'", line, col)
            node = stack.pop()
            stack[-1].append(node)
        else:
            stack[-1].append(Atom(tok, line, col))
    if len(stack) != 1:
        raise SexprError("unbalanced '('", stack[-1].line, stack[-1].col)
    return list(stack[0])


def parse_one(text):
    forms = parse_all(text)
    if len(forms) != 1:
        raise SexprError("expected exactly one s-expression", 1, 1)
    return forms[0]


def pos(form):
    if isinstance(form, (Atom, Node)):
        return form.line, form.col
    return 0, 0


def to_text(form, indent=0):
    """Render a parsed form back to source text (one group per line at depth 1)."""
    if isinstance(form, str):
        return str(form)
    inner = " ".join(to_text(x) for x in form)
    return "(" + inner + ")"
