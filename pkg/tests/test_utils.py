import json
import numpy as np
from ftasep_toolkit.utils import (
    env_int, env_float, env_flag, derive_seed, rng_for, fmt, write_csv, write_json, read_json,
    as_float_list,
)

def test_env_helpers(monkeypatch, capsys):
    monkeypatch.setenv('KPZ_WORKERS', '4')
    monkeypatch.setenv('KPZ_BAD', 'quatre')
    monkeypatch.delenv('KPZ_MISSING', raising=False)
    assert env_int('KPZ_WORKERS', 1) == 4
    assert env_int('KPZ_BAD', 1) == 1
    assert 'KPZ_BAD' in capsys.readouterr().err
    assert env_int('KPZ_MISSING', 7) == 7
    monkeypatch.setenv('KPZ_X', '2.5')
    assert env_float('KPZ_X', 0.0) == 2.5

def test_env_flag(monkeypatch):
    for raw, want in [('1', True), ('oui', True), ('off', False), ('non', False)]:
        monkeypatch.setenv('KPZ_VERIFY', raw)
        assert env_flag('KPZ_VERIFY') is want
    monkeypatch.setenv('KPZ_VERIFY', 'peut-être')
    assert env_flag('KPZ_VERIFY', True) is True

def test_derive_seed_is_pure():
    assert derive_seed(42, 3) == derive_seed(42, 3)
    assert derive_seed(42, 3) != derive_seed(42, 4)
    assert derive_seed(42, 3) != derive_seed(43, 3)
    a = rng_for(7, 0).random(5)
    b = rng_for(7, 0).random(5)
    assert np.array_equal(a, b)

def test_write_csv_and_json(tmp_path):
    p = write_csv(tmp_path / 'sub' / 'x.csv', ('x', 'F'), [(0.1, 1 / 3), (2, 'a')])
    lines = open(p, encoding='utf-8').read().splitlines()
    assert lines[0] == 'x,F'
    assert lines[1] == f"0.1,{fmt(1 / 3)}"
    assert lines[2] == '2,a'
    q = write_json(tmp_path / 'r.json', {'b': np.float64(0.5), 'a': np.int64(2), 'c': float('nan'),
                                         'd': np.array([True, False])})
    data = read_json(q)
    assert data == {'a': 2, 'b': 0.5, 'c': None, 'd': [True, False]}
    # clés triées
    assert list(json.load(open(q, encoding='utf-8'))) == ['a', 'b', 'c', 'd']

def test_as_float_list():
    assert as_float_list(None) == []
    assert as_float_list(1) == [1.0]
    assert as_float_list((0, '0.5')) == [0.0, 0.5]
