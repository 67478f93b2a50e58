import json
import numpy as np
import pytest
from ftasep_toolkit.distributions import CdfHandle, finite_n_lpp_cdf
from ftasep_toolkit.exp_kernel import ExpKernelParams
from ftasep_toolkit.harness import (
    rescale_ftasep_first, rescale_ftasep_bulk, rescale_ftasep_cross, cross_alpha, lpp_cross_alpha,
    cross_particle_index, empirical_cdf, ks_distance, TabulatedCdf, ExperimentConfig, ExperimentRunner,
    first_particle_family, run_experiment,
)

def test_rescalings_center():
    assert rescale_ftasep_first(25.0, 100.0, 1.0) == 0.0
    assert rescale_ftasep_first(100 * 0.3 * 0.7, 100.0, 0.3) == pytest.approx(0.0)
    r = 0.5
    assert rescale_ftasep_bulk(1000 * (1 - 6 * r + r * r) / 4, 1000.0, r) == pytest.approx(0.0)
    assert cross_alpha(1000.0, 0.0) == 0.5
    assert lpp_cross_alpha(1000, 0.0) == 0.5
    assert cross_alpha(1000.0, 1.0) > 0.5
    assert cross_particle_index(1000.0, 0.0) == 1
    # η = 0 : X_t(0) se réduit au changement d'échelle de la première particule
    assert rescale_ftasep_cross(300.0, 1000.0, 0.0) == pytest.approx(rescale_ftasep_first(300.0, 1000.0, 1.0))
    assert rescale_ftasep_cross(300.0, 1000.0, 0.5, literal=True) != rescale_ftasep_cross(300.0, 1000.0, 0.5)
    with pytest.raises(ValueError):
        cross_alpha(8.0, -5.0)

def test_first_particle_family():
    assert first_particle_family(0.7) == 'gse'
    assert first_particle_family(0.5) == 'goe'
    assert first_particle_family(0.3) == 'gaussian'

def test_empirical_cdf_and_ks():
    e = empirical_cdf([3.0, 1.0, 2.0])
    assert e.count == 3
    assert e(0.5) == 0.0 and e(2.0) == pytest.approx(2 / 3) and e(9.0) == 1.0
    assert ks_distance(e, empirical_cdf([1.0, 2.0, 3.0])) == 0.0
    rng = np.random.default_rng(0)
    s = empirical_cdf(rng.standard_normal(2000))
    assert ks_distance(s, CdfHandle('gaussian')) < 0.05
    assert ks_distance(s, lambda x: 0.5 * (1 + np.tanh(2 * x))) > 0.1
    with pytest.raises(ValueError):
        empirical_cdf([])

def test_tabulated_cdf_is_monotone():
    T = TabulatedCdf(CdfHandle('gaussian'), -3.0, 3.0)
    assert np.all(np.diff(T.values) >= 0)
    assert T(0.0) == pytest.approx(0.5, abs=1e-12)

def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm1.1', 't': 100, 'bogus': 1})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'t': 100})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm9.9'})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm1.1', 'alpha': 0.5, 't': 100})
    with pytest.raises(ValueError) as ex:
        ExperimentConfig.from_dict({'tag': 'thm1.2', 'alpha': 0.2, 'r': 0.4, 't': 100})
    assert 'for α > (1-r)/2' in str(ex.value)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm1.5', 'alpha': 0.9, 't': 100, 'eta': [0.5]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm1.12', 'alpha': 1.0, 'n': 100, 'eta': [0.0]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({'tag': 'thm1.10', 'alpha': 0.2, 'n': 100, 'kappa': 0.5})
    cfg = ExperimentConfig.from_dict({'tag': 'thm1.4', 'varpi': 0.5, 'eta': 0.3, 't': 1000})
    assert cfg.eta == [0.3]
    assert 'out' not in cfg.params()

def test_config_from_json(tmp_path):
    p = tmp_path / 'exp.json'
    p.write_text(json.dumps({'tag': 'thm1.9', 'alpha': 0.3, 'n': 30}), encoding='utf-8')
    assert ExperimentConfig.from_json(str(p)).n == 30
    with pytest.raises(ValueError):
        ExperimentConfig.from_json(str(tmp_path / 'absent.json'))
    bad = tmp_path / 'bad.json'
    bad.write_text('[1, 2]', encoding='utf-8')
    with pytest.raises(ValueError):
        ExperimentConfig.from_json(str(bad))

def test_runner_writes_outputs_and_is_reproducible(tmp_path, monkeypatch):
    monkeypatch.delenv('KPZ_WORKERS', raising=False)
    # 30 réplicas : seuil KS élargi (quantile 99 % de Kolmogorov ≈ 1.63/√30)
    cfg = ExperimentConfig(tag='thm1.9', alpha=0.3, n=40, replicates=30, seed=7, gate=0.4)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path / 'a')).run()
    assert rep['family'] == 'gaussian'
    assert rep['gate'] == 0.4 and rep['passed']
    assert set(['ks', 'gate', 'passed', 'params', 'calibration_note']) <= set(rep)
    samples_a = (tmp_path / 'a' / 'samples.csv').read_text(encoding='utf-8')
    assert samples_a.splitlines()[0] == 'chi_diag'
    assert len(samples_a.splitlines()) == 31
    run_experiment(cfg, out_dir=str(tmp_path / 'b'))
    assert (tmp_path / 'b' / 'samples.csv').read_text(encoding='utf-8') == samples_a
    report = json.loads((tmp_path / 'a' / 'report.json').read_text(encoding='utf-8'))
    assert report == json.loads((tmp_path / 'b' / 'report.json').read_text(encoding='utf-8'))

def test_couplings_experiment_passes(tmp_path):
    cfg = ExperimentConfig(tag='couplings', replicates=2, max_events=500, seed=1)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=1).run()
    assert rep['violations'] == 0 and rep['passed']
    assert rep['first_violation'] is None

@pytest.mark.slow
def test_parallel_workers_match_serial(tmp_path):
    cfg = ExperimentConfig(tag='thm1.10', alpha=0.9, kappa=0.5, n=40, replicates=16, seed=3)
    ExperimentRunner(cfg, out_dir=str(tmp_path / 's'), workers=1).run()
    ExperimentRunner(cfg, out_dir=str(tmp_path / 'p'), workers=2).run()
    s = (tmp_path / 's' / 'samples.csv').read_text(encoding='utf-8')
    assert s == (tmp_path / 'p' / 'samples.csv').read_text(encoding='utf-8')

def test_density_report_includes_lln(tmp_path):
    cfg = ExperimentConfig(tag='density', t=60, replicates=2, seed=5)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=1).run()
    header = (tmp_path / 'samples.csv').read_text(encoding='utf-8').splitlines()[0].split(',')
    assert header[-2:] == ['lln_r_0.1', 'lln_r_0.5']
    assert set(rep['lln']) == {'r=0.1', 'r=0.5'}
    assert rep['lln']['r=0.5']['predicted'] == pytest.approx((1 - 3 + 0.25) / 4)
    assert 0.5 < rep['lln']['r=0.1']['rho'] < 1.0

# ---- Critères d'acceptation (longs) -----------------------------------

@pytest.mark.slow
@pytest.mark.parametrize('data', [
    {'tag': 'thm1.1', 'alpha': 1.0, 't': 2000},
    {'tag': 'thm1.3', 'alpha': 0.5, 't': 2000},
    {'tag': 'thm1.3', 'alpha': 0.3, 't': 2000},
    {'tag': 'thm1.2', 'alpha': 1.0, 'r': 0.5, 't': 2000},
    {'tag': 'thm1.9', 'alpha': 1.0, 'n': 500},
    {'tag': 'thm1.10', 'alpha': 1.0, 'kappa': 0.25, 'n': 500},
])
def test_ks_gates_at_calibration_size(tmp_path, data):
    cfg = ExperimentConfig.from_dict(dict(data, replicates=2000, seed=11))
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=4).run()
    assert rep['passed'], rep['ks']

@pytest.mark.slow
def test_trichotomy_selects_each_family(tmp_path):
    cfg = ExperimentConfig(tag='trichotomy', t=2000, replicates=2000, seed=13)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=4).run()
    assert rep['passed'], rep['selected']

@pytest.mark.slow
def test_density_profile_and_lln(tmp_path):
    cfg = ExperimentConfig(tag='density', t=2000, replicates=200, seed=17)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=4).run()
    assert rep['sup_error'] < rep['gate']
    assert all(v['error'] < rep['lln_gate'] for v in rep['lln'].values())
    assert rep['passed']

@pytest.mark.slow
def test_stationary_flux(tmp_path):
    cfg = ExperimentConfig(tag='flux', t=500, p=0.5, replicates=20, seed=19)
    rep = ExperimentRunner(cfg, out_dir=str(tmp_path), workers=4).run()
    assert rep['flux_exact'] == pytest.approx(1 / 6)
    assert rep['passed'], rep['rel_error']

def _h44_samples(alpha, size, rng):
    """H(4,4) échantillonné en bloc : une programmation dynamique vectorisée sur les réplicas."""
    w = rng.standard_exponential((size, 5, 5))
    H = np.full((size, 5, 5), -np.inf)
    H[:, :, 0] = 0.0
    for n in range(1, 5):
        for m in range(1, n + 1):
            wt = w[:, n, m] / alpha if n == m else w[:, n, m]
            H[:, n, m] = wt + np.maximum(H[:, n - 1, m], H[:, n, m - 1])
    return H[:, 4, 4]

@pytest.mark.slow
@pytest.mark.parametrize('h', [12.0, 16.0, 20.0])
def test_finite_n_cdf_matches_monte_carlo(h):
    rng = np.random.default_rng(23)
    samples = np.concatenate([_h44_samples(1.0, 250_000, rng) for _ in range(4)])
    size = samples.size
    p_mc = float(np.mean(samples < h))
    se = np.sqrt(p_mc * (1 - p_mc) / size)
    p = finite_n_lpp_cdf([h], ExpKernelParams(1.0, (4,), (4,)))
    assert abs(p - p_mc) < 3 * se + 1e-6
