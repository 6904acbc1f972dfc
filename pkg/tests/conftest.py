import io

import numpy as np
import pytest

from privtab.tabular import encode, infer_schema, read_csv

MIXED_CSV = """age,score,color,size,flag,label
1.5,0.10,red,s,yes,pos
2.5,0.20,green,m,no,neg
3.5,0.35,blue,l,yes,neg
9.0,0.50,red,s,no,neg
4.0,0.65,green,m,yes,pos
5.0,0.80,blue,l,no,neg
6.0,0.95,red,m,yes,pos
7.0,0.40,green,s,no,neg
8.0,0.55,blue,m,yes,neg
2.0,0.70,red,l,no,neg
"""


@pytest.fixture(scope="session")
def mixed_schema():
    return infer_schema(io.StringIO(MIXED_CSV))


@pytest.fixture(scope="session")
def mixed_rows():
    _, rows = read_csv(io.StringIO(MIXED_CSV))
    return rows


@pytest.fixture(scope="session")
def mixed_encoded(mixed_schema, mixed_rows):
    return encode(mixed_rows, mixed_schema)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
