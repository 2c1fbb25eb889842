use eigdecon::measure::FamilyId;
use eigdecon::rmt::*;
use eigdecon::{AtomicMeasure, Error, Mode};

fn spec(kind: Mode, measures: Vec<AtomicMeasure>, dimension: usize, seed: u64) -> EnsembleSpec {
    EnsembleSpec { kind, measures, dimension, seed }
}

#[test]
fn haar_is_orthogonal() {
    let q = haar_orthogonal(256, &mut stream(1, 0));
    let qtq = q.transpose() * &q;
    for i in 0..256 {
        for j in 0..256 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((qtq[(i, j)] - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn haar_one_by_one_is_a_fair_sign() {
    let mut rng = stream(2, 0);
    let draws = 4000;
    let plus = (0..draws).filter(|_| haar_orthogonal(1, &mut rng)[(0, 0)] == 1.0).count();
    // binomial(4000, 1/2): sd = sqrt(1000)
    assert!((plus as f64 - 2000.0).abs() <= 5.0 * 1000f64.sqrt());
}

#[test]
fn haar_first_column_is_uniform_on_sphere() {
    let mut rng = stream(3, 0);
    let draws = 10_000;
    let n = 8;
    let mut sum = [0.0; 8];
    let mut sq = [0.0; 8];
    for _ in 0..draws {
        let q = haar_orthogonal(n, &mut rng);
        for i in 0..n {
            sum[i] += q[(i, 0)];
            sq[i] += q[(i, 0)] * q[(i, 0)];
        }
    }
    // coordinate of a uniform unit vector in R^8: mean 0, var 1/8, E[x^4] = 3/80
    let sd_mean = (1.0 / 8.0 / draws as f64).sqrt();
    let sd_var = ((3.0 / 80.0 - 1.0 / 64.0) / draws as f64).sqrt();
    for i in 0..n {
        assert!((sum[i] / draws as f64).abs() <= 5.0 * sd_mean);
        assert!((sq[i] / draws as f64 - 0.125).abs() <= 5.0 * sd_var);
    }
}

#[test]
fn multiplicities() {
    let m = AtomicMeasure::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
    assert_eq!(spectrum_matrix(&m, 4).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    let m = AtomicMeasure::new([(0.0, 2.0 / 3.0), (1.0, 1.0 / 3.0)]).unwrap();
    assert_eq!(spectrum_matrix(&m, 3).unwrap(), vec![0.0, 0.0, 1.0]);
    let d = spectrum_matrix(&m, 100).unwrap();
    assert_eq!(d.iter().filter(|&&v| v == 0.0).count(), 67);
    assert_eq!(d.len(), 100);
    assert!(spectrum_matrix(&m, 1).is_err());
}

#[test]
fn dirac_summand_shifts_exactly() {
    let a1 = FamilyId::F3.family().eval(0.6).unwrap();
    let s = sample_additive(&spec(Mode::Additive, vec![a1.clone(), AtomicMeasure::dirac(0.25).unwrap()], 64, 7)).unwrap();
    let base = spectrum_matrix(&a1, 64).unwrap();
    let mut want: Vec<f64> = base.iter().map(|v| v + 0.25).collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in s.values().iter().zip(&want) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn additive_support_within_operator_bounds() {
    let f = FamilyId::F4.family();
    let s = sample_additive(&spec(Mode::Additive, vec![f.eval(0.4).unwrap(), f.eval(1.0).unwrap()], 1024, 8)).unwrap();
    assert_eq!(s.dimension(), 1024);
    assert!(s.values()[0] >= -1.4 - 1e-12 && s.values()[1023] <= 1.4 + 1e-12);
}

#[test]
fn unit_factor_and_scalar_products() {
    let a1 = FamilyId::F5.family().eval(2.0).unwrap();
    let s = sample_multiplicative(&spec(Mode::Multiplicative, vec![a1.clone(), AtomicMeasure::dirac(1.0).unwrap()], 96, 1)).unwrap();
    for (a, b) in s.values().iter().zip(spectrum_matrix(&a1, 96).unwrap()) {
        assert!((a - b).abs() <= 1e-12);
    }
    let s = sample_multiplicative(&spec(
        Mode::Multiplicative,
        vec![AtomicMeasure::dirac(1.5).unwrap(), AtomicMeasure::dirac(0.4).unwrap(), AtomicMeasure::dirac(2.0).unwrap()],
        48,
        2,
    ))
    .unwrap();
    assert!(s.values().iter().all(|v| (v - 1.2).abs() <= 1e-12));
}

#[test]
fn trace_and_determinant_conserved() {
    let n = 256;
    for seed in 0..2 {
        let f = FamilyId::F3.family();
        let ms = vec![f.eval(0.5).unwrap(), f.eval(0.9).unwrap()];
        let s = sample_additive(&spec(Mode::Additive, ms.clone(), n, seed)).unwrap();
        let want: f64 = ms.iter().map(|m| spectrum_matrix(m, n).unwrap().iter().sum::<f64>()).sum::<f64>() / n as f64;
        assert!((s.mean() - want).abs() <= 1e-10 * (1.0 + want.abs()));

        let f = FamilyId::F6.family();
        let ms = vec![f.eval(1.4).unwrap(), f.eval(2.2).unwrap(), f.eval(3.0).unwrap()];
        let s = sample_multiplicative(&spec(Mode::Multiplicative, ms.clone(), n, seed)).unwrap();
        let logdet: f64 = s.values().iter().map(|v| v.ln()).sum();
        let want: f64 = ms.iter().map(|m| spectrum_matrix(m, n).unwrap().iter().map(|v| v.ln()).sum::<f64>()).sum();
        assert!((logdet - want).abs() <= 1e-8 * want.abs().max(1.0));
    }
}

#[test]
fn multiplicative_support_within_product_bounds() {
    let f = FamilyId::F5.family();
    let ms = vec![f.eval(1.7).unwrap(), f.eval(2.5).unwrap()];
    let s = sample_multiplicative(&spec(Mode::Multiplicative, ms.clone(), 256, 5)).unwrap();
    let lo: f64 = ms.iter().map(|m| m.locations()[0]).product();
    let hi: f64 = ms.iter().map(|m| m.locations()[m.len() - 1]).product();
    assert!(s.values()[0] >= lo * (1.0 - 1e-12) && s.values()[255] <= hi * (1.0 + 1e-12));
}

#[test]
fn reproducible_and_seed_sensitive() {
    let f = FamilyId::F4.family();
    let sp = spec(Mode::Additive, vec![f.eval(0.4).unwrap(), f.eval(0.7).unwrap(), f.eval(1.0).unwrap()], 128, 42);
    let a = sample(&sp).unwrap();
    let b = sample(&sp).unwrap();
    assert_eq!(a, b);
    let c = sample(&EnsembleSpec { seed: 43, ..sp }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn classical_sums() {
    let ds = vec![AtomicMeasure::dirac(0.5).unwrap(), AtomicMeasure::dirac(-0.2).unwrap()];
    let s = sample_classical(&ds, 50, &mut stream(1, 0)).unwrap();
    assert!(s.values().iter().all(|v| (v - 0.3).abs() <= 1e-15));

    let n = 100_000;
    let coin = FamilyId::F1.family().eval(1.0).unwrap();
    let s = sample_classical(&[coin], n, &mut stream(2, 0)).unwrap();
    assert!((s.mean() - 0.5).abs() <= 5.0 / (2.0 * (n as f64).sqrt()));

    let f = FamilyId::F1.family();
    let ms: Vec<AtomicMeasure> = [0.2, 0.6, 1.0].iter().map(|&x| f.eval(x).unwrap()).collect();
    let s = sample_classical(&ms, 102_400, &mut stream(3, 0)).unwrap();
    let mut distinct: Vec<f64> = Vec::new();
    for &v in s.values() {
        if distinct.last().is_none_or(|d| v - d > 1e-9) {
            distinct.push(v);
        }
    }
    let want = [0.0, 0.2, 0.6, 0.8, 1.0, 1.2, 1.6, 1.8];
    assert_eq!(distinct.len(), 8);
    for (a, b) in distinct.iter().zip(want) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn invalid_specs() {
    let m = AtomicMeasure::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
    assert!(matches!(
        sample_multiplicative(&spec(Mode::Multiplicative, vec![m.clone(), m.clone()], 8, 0)),
        Err(Error::NonPositiveMeasure)
    ));
    assert!(sample_additive(&spec(Mode::Additive, vec![m.clone()], 8, 0)).is_err());
    assert!(sample_additive(&spec(Mode::Additive, vec![m.clone(), m.clone()], 0, 0)).is_err());
    assert!(sample_additive(&spec(Mode::Multiplicative, vec![m.clone(), m], 8, 0)).is_err());
}
