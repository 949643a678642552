# -*- coding: utf-8 -*-
"""driftlab - laboratoire de drift analysis pour heuristiques de recherche randomisées"""

__version__ = "1.0.0"
