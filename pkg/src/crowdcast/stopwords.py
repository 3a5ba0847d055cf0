"""Bundled English stop-word list.

Fixed and versioned with the package so that tokenization is reproducible
across runs and machines.  Deliberately short: only high-frequency function
words that carry no sentiment.
"""

STOPWORDS = frozenset(
    """
    a about above after again all am an and any are as at be because been
    before being below between both but by can did do does doing down during
    each few for from further had has have having he her here hers him his
    how i if in into is it its itself just me more most my myself no nor not
    of off on once only or other our ours out over own re s same she should
    so some such t than that the their theirs them then there these they
    this those through to too under until up very was we were what when
    where which while who whom why will with you your yours
    """.split()
)
