"""
pptdyn

Entanglement dynamics of bipartite quantum channels under PPT superchannels: PPT
predicates, negativity and LN_max measures, conversion distances, exact single-shot
cost, NPT witnesses and no-go scenarios.
"""

from .config import settings

__version__ = settings.app_version
