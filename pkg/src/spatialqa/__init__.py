"""Hierarchical 3D spatial VQA corpus synthesis and evaluation.

Builds question/answer corpora over metric point maps and object
annotations across four task levels (geometric perception, object
properties, inter-object relations, abstract reasoning), and scores
model responses under ratio-band, angular and judgement rules.
"""

__version__ = "0.1.0"
