# flake8: noqa: F401
from varcast.models.common import (REGIONS, ExogenousPolicy, ExogenousSelector,
                                   Variant)
from varcast.models.series import (MultivariateSeries, SeasonalTransform,
                                   ThreeWaySplit, TimeIndex)
