use std::time::{Duration, Instant};

use l96_core::reduced::{simulate_reduced, Parameterization, WarmStart};
use l96_core::varx::{CovarianceKind, NoiseRoot, VarxModel, VarxSpec};
use l96_core::ModelConfig;

fn setup(k: usize) -> (ModelConfig, Parameterization, WarmStart) {
    let mut config = ModelConfig::trimodal();
    config.k = k;
    let model = VarxModel {
        spec: VarxSpec::varx(14, CovarianceKind::DiagonalIso, k),
        a0: 0.1,
        a_p: 0.9,
        lower_lags: Vec::new(),
        d: -0.2,
        noise: NoiseRoot::Diagonal { sigma: 0.3 },
    };
    let param = Parameterization::Varx(model);
    let init = WarmStart::zeros(k, &param);
    (config, param, init)
}

fn best_of(runs: usize, k: usize, steps: usize) -> Duration {
    let (config, param, init) = setup(k);
    (0..runs)
        .map(|_| {
            let start = Instant::now();
            simulate_reduced(&config, &param, &init, 1, steps).unwrap();
            start.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn reduced_cost_is_linear_in_grid_size() {
    let steps = 20_000;
    let small = best_of(3, 512, steps);
    let large = best_of(3, 1024, steps);
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    assert!(
        ratio <= 2.5,
        "K=512 {small:?}, K=1024 {large:?}, ratio {ratio:.2}"
    );
}

#[test]
fn trajectories_do_not_depend_on_threading() {
    let (config, param, init) = setup(64);
    let (config, param, init) = (&config, &param, &init);
    let serial: Vec<_> = (0..4)
        .map(|seed| simulate_reduced(config, param, init, seed, 2_000).unwrap())
        .collect();
    let threaded: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|seed| {
                s.spawn(move || simulate_reduced(config, param, init, seed, 2_000).unwrap())
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (a, b) in serial.iter().zip(&threaded) {
        assert_eq!(a.x.as_slice(), b.x.as_slice());
        assert_eq!(a.b.as_slice(), b.b.as_slice());
    }
}
