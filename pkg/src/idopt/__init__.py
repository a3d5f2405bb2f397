"""Influence-diagram maximum-expected-utility solving.

Library layout:
  graphs       directed graphs, topological sort, d-separation
  diagram      influence diagrams, parametrizations, policies, free splits
  rjt          rooted junction tree builders and validation
  inference    exact policy evaluation, SPU, brute-force enumeration
  model        abstract linear models, LP-file writer/parser
  formulation  local polytope, fixed-conditional equalities, cuts, McCormick
  solve        LP solving, branch and bound, external-solver round trip
  generators   the mdp / pomdp_lm / chess instance families
  experiment   experiment harness, reporting, figures
"""

__version__ = "0.1.0"
