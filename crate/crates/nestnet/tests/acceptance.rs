//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nestnet::cli::{deserialize_net, serialize_net};
use nestnet::constructive::{
    approximator_full, approximator_interior, bit_extract_base, bit_extract_net, bit_pair_net, cpl_to_net, floor_base,
    floor_nested, indexed_bit_sum_net, max_pair_net, mid_net, min_pair_net, phi1_grid_net, point_fit_net,
    step_function_net, steps_exponent, PNorm, TargetFunction, TriflingRegion,
};
use nestnet::ir::{Activation, AffineMap, NestNet};
use nestnet::numerics::{q, qint, ExactPwl, PiecewiseLinear1D, Scalar, Q};
use nestnet::train::{
    build_classifier, build_experiment_nets, evaluate_accuracy, gradient_check, rho_initial, spiral_dataset, train,
    NetKind, SpiralConfig, TrainConfig,
};
use nestnet::verify::{exhaustive_bit_check, measure_approximator, GridSpec};

type Outcome = Result<String, String>;

fn floor_q(x: &Q) -> BigInt {
    let (n, d) = (x.numer(), x.denom());
    let t = n / d;
    if n.is_negative() && &t * d != *n {
        t - 1
    } else {
        t
    }
}

fn pow2_int(e: u64) -> BigInt {
    BigInt::one() << (e as usize)
}

fn dyadic(e: u64) -> Q {
    Q::new(BigInt::one(), pow2_int(e))
}

fn count(net: &NestNet) -> u128 {
    net.param_count().expect("param count") as u128
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("{what} took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

// five equally spaced points covering [lo, lo + width]
fn five(lo: &Q, width: &Q) -> Vec<Q> {
    (0..5).map(|i| lo + width * q(i, 4)).collect()
}

const PAIRS_NR: [(u32, u32); 6] = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (3, 2)];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    for (n, r) in PAIRS_NR {
        let e = steps_exponent(n, r);
        let delta = dyadic(e + 2);
        let net = floor_nested(n, r, &delta).map_err(|e| e.to_string())?;
        let exec = net.compile_exact().map_err(|e| e.to_string())?;
        let width = Q::one() - Q::from_integer(pow2_int(e)) * &delta;
        let steps = 1u64 << n.pow(r);
        for l in 0..steps {
            for x in five(&qint(l as i64), &width) {
                let got = exec.eval1(&x);
                checked += 1;
                ensure(got == Q::from_integer(floor_q(&x)), || format!("floor n={n} r={r} at {x}: got {got}"))?;
            }
        }
        let step_delta = dyadic(3);
        for j in [1, (steps / 2).max(1), steps] {
            let net = step_function_net(n, r, &step_delta, j).map_err(|e| e.to_string())?;
            let exec = net.compile_exact().map_err(|e| e.to_string())?;
            for l in 0..=j {
                let w = if l == j { Q::one() } else { Q::one() - &step_delta };
                for x in five(&qint(l as i64), &w) {
                    let want = Q::from_integer(floor_q(&x).min(BigInt::from(j)));
                    let got = exec.eval1(&x);
                    checked += 1;
                    ensure(got == want, || format!("step n={n} r={r} J={j} at {x}: got {got}, want {want}"))?;
                }
            }
        }
    }
    within_time(start, Duration::from_secs(60), "floor/step sweep")?;
    Ok(format!("{checked} points exact in {:.1}s", start.elapsed().as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (n, s) in [(2u32, 1u32), (3, 1), (2, 2), (3, 2)] {
        let report = exhaustive_bit_check(n, s).map_err(|e| e.to_string())?;
        ensure(report.passed(), || format!("({n},{s}): {report}"))?;

        // independent pass: encode k + 0.θ and compare with a direct popcount
        let net = bit_extract_net(n, s).map_err(|e| e.to_string())?;
        let exec = net.compile_exact().map_err(|e| e.to_string())?;
        let bits = n.pow(s) as usize;
        let mut cases = 0u64;
        for mask in 0u64..(1 << bits) {
            let theta: Vec<bool> = (0..bits).map(|i| mask >> (bits - 1 - i) & 1 == 1).collect();
            let frac = Q::new(BigInt::from(mask), pow2_int(bits as u64));
            for k in 0..=bits {
                let want = theta[..k].iter().filter(|b| **b).count() as i64;
                let got = exec.eval1(&(qint(k as i64) + &frac));
                cases += 1;
                ensure(got == qint(want), || format!("({n},{s}) mask {mask:b} k={k}: got {got}, want {want}"))?;
            }
        }
        ensure(cases == report.cases, || format!("({n},{s}): {cases} cases vs {}", report.cases))?;
        let budget = 57 * (s as u128 + 7).pow(2) * (n as u128 + 1);
        ensure(count(&net) <= budget, || format!("({n},{s}): {} params > {budget}", count(&net)))?;
        notes.push(format!("({n},{s}) {}/{}", report.exact, report.cases));
    }
    within_time(start, Duration::from_secs(120), "bit extraction")?;
    Ok(notes.join(", "))
}

fn seeded_sequence(len: usize, eps: &Q, rng: &mut ChaCha8Rng) -> Vec<Q> {
    let unit = eps / qint(32);
    let mut cur: i64 = rng.gen_range(0..=200);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            cur = (cur + rng.gen_range(-32..=32)).max(0);
        }
        out.push(&unit * qint(cur));
    }
    out
}

fn criterion_3() -> Outcome {
    let mut total = 0;
    for n in [2u32, 3] {
        for s in [1u32, 2] {
            let j = n.pow(s + 1) as usize;
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * n as u64 + 100 * s as u64 + seed);
                let eps = if seed % 2 == 0 { q(1, 16) } else { q(1, 10) };
                let y = seeded_sequence(j, &eps, &mut rng);
                for w in y.windows(2) {
                    ensure((&w[1] - &w[0]).abs() <= eps, || "generator produced a large gap".into())?;
                }
                let net = point_fit_net(&y, &eps, n, s).map_err(|e| e.to_string())?;
                let exec = net.compile_exact().map_err(|e| e.to_string())?;
                for (i, yi) in y.iter().enumerate() {
                    let want = Q::from_integer(floor_q(&(yi / &eps))) * &eps;
                    let got = exec.eval1(&qint(i as i64));
                    ensure(got == want, || format!("n={n} s={s} seed={seed} j={i}: got {got}, want {want}"))?;
                    ensure((&got - yi).abs() <= eps, || {
                        format!("n={n} s={s} seed={seed} j={i}: off by more than eps")
                    })?;
                }
                let top = y.iter().max().cloned().unwrap_or_else(Q::zero);
                for _ in 0..1000 {
                    let x = Q::new(BigInt::from(rng.gen_range(-997..=(j as i64 + 1) * 997)), BigInt::from(997));
                    let v = exec.eval1(&x);
                    ensure(v >= Q::zero() && v <= top, || {
                        format!("n={n} s={s} seed={seed}: clamp broken at {x}: {v}")
                    })?;
                }
                let budget = 350 * (s as u128 + 7).pow(2) * (n as u128 + 1);
                ensure(count(&net) <= budget, || format!("n={n} s={s}: {} params > {budget}", count(&net)))?;
                total += 1;
            }
        }
    }
    Ok(format!("{total} sequences fitted exactly, 1000 clamp probes each"))
}

fn targets(d: usize) -> TargetFunction {
    if d == 1 {
        TargetFunction::abs_shift(q(1, 3))
    } else {
        TargetFunction::hinge2()
    }
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    let mut check = |what: String, net: &NestNet, budget: u128| -> Result<(), String> {
        checked += 1;
        let c = count(net);
        ensure(c <= budget, || format!("{what}: {c} params > {budget}"))
    };
    for (n, r) in PAIRS_NR {
        let (nn, rr) = (n as u128, r as u128);
        let delta = dyadic(steps_exponent(n, r) + 2);
        let net = floor_nested(n, r, &delta).map_err(|e| e.to_string())?;
        check(format!("floor_nested({n},{r})"), &net, (12 * rr + 68) * nn)?;
        let steps = 1u64 << n.pow(r);
        for j in [1, (steps / 2).max(1), steps] {
            let net = step_function_net(n, r, &dyadic(3), j).map_err(|e| e.to_string())?;
            check(format!("step({n},{r},J={j})"), &net, 36 * (rr + 7) * nn)?;
        }
    }
    for n in [2u32, 3] {
        let net = bit_extract_base(n).map_err(|e| e.to_string())?;
        check(format!("bit_extract_base({n})"), &net, 128 * n as u128 + 294)?;
    }
    for (n, s) in [(2u32, 1u32), (3, 1), (2, 2), (3, 2)] {
        let sq = (s as u128 + 7).pow(2);
        let net = bit_extract_net(n, s).map_err(|e| e.to_string())?;
        check(format!("bit_extract({n},{s})"), &net, 57 * sq * (n as u128 + 1))?;
        let m = n.pow(s) as usize;
        let theta: Vec<Vec<bool>> = (0..n as usize).map(|i| (0..m).map(|k| (i + k) % 3 != 0).collect()).collect();
        let net = indexed_bit_sum_net(&theta, n, s).map_err(|e| e.to_string())?;
        check(format!("indexed_bit_sum({n},{s})"), &net, 58 * sq * (n as u128 + 1))?;
    }
    for n in [2u32, 3] {
        for s in [1u32, 2] {
            let eps = q(1, 16);
            let mut rng = ChaCha8Rng::seed_from_u64(7 + n as u64 * 10 + s as u64);
            let y = seeded_sequence(n.pow(s + 1) as usize, &eps, &mut rng);
            let net = point_fit_net(&y, &eps, n, s).map_err(|e| e.to_string())?;
            check(format!("point_fit({n},{s})"), &net, 350 * (s as u128 + 7).pow(2) * (n as u128 + 1))?;
        }
    }
    for d in [1usize, 2] {
        let f = targets(d);
        for s in [1u32, 2] {
            for n in 2u32..=6 {
                let (dd, nn, sq) = (d as u128, n as u128, (s as u128 + 7).pow(2));
                let fin = approximator_full(&f, n, s, PNorm::Finite(1)).map_err(|e| e.to_string())?;
                check(format!("interior(d={d},s={s},n={n})"), &fin.interior, 355 * dd * dd * sq * (2 * nn + 1))?;
                let k = fin.k as i64;
                let own = approximator_interior(&f, n, s, &q(1, 4 * k)).map_err(|e| e.to_string())?;
                check(format!("interior δ=1/4K (d={d},s={s},n={n})"), &own.net, 355 * dd * dd * sq * (2 * nn + 1))?;
                check(format!("full p<∞ (d={d},s={s},n={n})"), &fin.net, 1000 * dd * dd * sq * (nn + 1))?;
                let inf = approximator_full(&f, n, s, PNorm::Infinity).map_err(|e| e.to_string())?;
                check(
                    format!("full p=∞ (d={d},s={s},n={n})"),
                    &inf.net,
                    10u128.pow(d as u32 + 3) * dd * dd * sq * (nn + 1),
                )?;
            }
        }
    }
    Ok(format!("{checked} networks within budget"))
}

// sup ≤ c·√d·n^(-(s+1)/d), squared: sup²·n^(2(s+1)/d) ≤ c²·d
fn dominated(sup: &Q, c: i64, d: usize, n: u32, s: u32) -> bool {
    let e = 2 * (s + 1) / d as u32;
    assert_eq!(e * d as u32, 2 * (s + 1), "exponent must be integral");
    sup * sup * Q::from_integer(BigInt::from(n).pow(e)) <= qint(c * c * d as i64)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rows = 0;
    let mut worst = 0.0f64;
    for d in [1usize, 2] {
        let f = targets(d);
        // no Lipschitz factor for |x - y| (√2 in the Euclidean norm); this only tightens the bound
        let ns: Vec<u32> = if d == 1 { (2..=6).collect() } else { vec![2, 3] };
        for s in [1u32, 2] {
            for &n in &ns {
                for (p, factor) in [(PNorm::Finite(1), 6), (PNorm::Infinity, 7)] {
                    let a = approximator_full(&f, n, s, p).map_err(|e| e.to_string())?;
                    let region = TriflingRegion::new(d, a.k, a.delta.clone()).map_err(|e| e.to_string())?;
                    let grid = match p {
                        PNorm::Infinity => GridSpec::full_cube(d, 2001).with_band_probes(region),
                        PNorm::Finite(_) => GridSpec::outside(region, 2001),
                    };
                    let rep = measure_approximator(&a, &f, &grid, &[p]).map_err(|e| e.to_string())?;
                    let sup = rep.sup_error.as_exact().ok_or("inexact sup")?.clone();

                    // the reported maximizer must reproduce the sup through the full network
                    let exec = a.net.compile_exact().map_err(|e| e.to_string())?;
                    let at = exec.eval(&rep.argmax).map_err(|e| e.to_string())?[0].clone();
                    let direct = (at - f.eval_exact(&rep.argmax)).abs();
                    ensure(direct == sup, || format!("d={d} s={s} n={n} p={p}: network gives {direct}, report {sup}"))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 31 + s as u64);
                    for _ in 0..20 {
                        let x: Vec<Q> = (0..d).map(|_| q(rng.gen_range(0..=2000), 2000)).collect();
                        let net_v = exec.eval(&x).map_err(|e| e.to_string())?[0].clone();
                        ensure(net_v == a.eval_structured(&x), || format!("structured evaluation differs at {x:?}"))?;
                    }

                    ensure(dominated(&sup, factor, d, n, s), || {
                        format!("d={d} s={s} n={n} p={p}: sup {} above {factor}√d·n^(-(s+1)/d)", sup_f64(&sup))
                    })?;
                    let bound = factor as f64 * (d as f64).sqrt() * (n as f64).powf(-((s + 1) as f64) / d as f64);
                    worst = worst.max(sup_f64(&sup) / bound);
                    rows += 1;
                }
            }
        }
    }
    within_time(start, Duration::from_secs(600), "bound sweep")?;
    Ok(format!("{rows} configurations dominated, worst sup/bound {worst:.3}, {:.1}s", start.elapsed().as_secs_f64()))
}

fn sup_f64(x: &Q) -> f64 {
    Scalar::Exact(x.clone()).to_f64()
}

fn small_q(rng: &mut ChaCha8Rng) -> Q {
    q(rng.gen_range(-12..=12), rng.gen_range(1..=6))
}

fn random_map(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> AffineMap {
    let w = (0..rows * cols).map(|_| small_q(rng)).collect();
    let b = (0..rows).map(|_| small_q(rng)).collect();
    AffineMap::exact(rows, cols, w, b)
}

fn random_height2(rng: &mut ChaCha8Rng) -> (NestNet, usize) {
    let subs: Vec<NestNet> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let h = rng.gen_range(1..=3);
            NestNet::build(vec![random_map(h, 1, rng), random_map(1, h, rng)], vec![vec![Activation::ReLU; h]], &[])
                .expect("scalar sub-network")
        })
        .collect();
    let input = rng.gen_range(1..=3);
    let hidden = rng.gen_range(1..=2);
    let mut layers = Vec::new();
    let mut acts = Vec::new();
    let mut cols = input;
    let mut uses = vec![0usize; subs.len()];
    for l in 0..hidden {
        let width = rng.gen_range(2..=4);
        layers.push(random_map(width, cols, rng));
        let row: Vec<Activation> = (0..width)
            .map(|i| {
                let pick = if l == 0 && i == 0 { 2 } else { rng.gen_range(0..3) };
                match pick {
                    0 => Activation::Identity,
                    1 => Activation::ReLU,
                    _ => {
                        let k = rng.gen_range(0..subs.len());
                        uses[k] += 1;
                        Activation::SubNet(subs[k].id())
                    }
                }
            })
            .collect();
        acts.push(row);
        cols = width;
    }
    layers.push(random_map(rng.gen_range(1..=2), cols, rng));
    let max_uses = uses.iter().copied().max().unwrap_or(0);
    let refs: Vec<&NestNet> = subs.iter().collect();
    (NestNet::build(layers, acts, &refs).expect("random net"), max_uses)
}

fn criterion_6() -> Outcome {
    let mut shared = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, max_uses) = random_height2(&mut rng);
        ensure(net.height().map_err(|e| e.to_string())? == 2, || format!("seed {seed}: height is not 2"))?;
        let flat = net.expand().map_err(|e| e.to_string())?;
        ensure(flat.height().map_err(|e| e.to_string())? == 1, || format!("seed {seed}: expansion not flat"))?;
        for _ in 0..100 {
            let x: Vec<Q> = (0..net.input_dim()).map(|_| q(rng.gen_range(-50..=50), rng.gen_range(1..=9))).collect();
            let a = net.eval_exact(&x).map_err(|e| e.to_string())?;
            let b = flat.eval_exact(&x).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("seed {seed}: outputs differ at {x:?}"))?;
        }
        if max_uses >= 2 {
            shared += 1;
            let (nested, expanded) = (count(&net), count(&flat));
            ensure(expanded > nested, || format!("seed {seed}: expanded {expanded} <= nested {nested}"))?;
        }
    }
    ensure(shared > 0, || "no random net reused a sub-network".into())?;
    Ok(format!("50 nets equal on 100 inputs each, {shared} with shared sub-networks grew on expansion"))
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut net = build_classifier(2, 8, 3, 2, NetKind::Nested, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let shared: Vec<usize> = net.shared_blocks().into_iter().flat_map(|(_, r)| r).collect();
        ensure(!shared.is_empty(), || "no shared slots".into())?;
        for &i in &shared {
            net.params_mut()[i] += rng.gen_range(-0.2..0.2);
        }
        let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let batch: Vec<(&[f64], usize)> = xs.iter().map(|x| (x.as_slice(), rng.gen_range(0..2))).collect();
        let mut slots: Vec<usize> = Vec::new();
        while slots.len() < 6 {
            let s = shared[rng.gen_range(0..shared.len())];
            if !slots.contains(&s) {
                slots.push(s);
            }
        }
        while slots.len() < 20 {
            let s = rng.gen_range(0..net.param_count());
            if !slots.contains(&s) {
                slots.push(s);
            }
        }
        for g in gradient_check(&net, &batch, &slots, 1e-4).map_err(|e| e.to_string())? {
            worst = worst.max(g.rel_err);
            ensure(g.rel_err <= 1e-4, || {
                format!("seed {seed} slot {}: analytic {} numeric {} rel {}", g.slot, g.analytic, g.numeric, g.rel_err)
            })?;
        }
    }
    Ok(format!("200 slots checked, worst relative error {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut lines = Vec::new();
    let mut all_above = true;
    for seed in 0..5u64 {
        let train_set = spiral_dataset(&SpiralConfig { samples_per_class: 5000, seed, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let test_set =
            spiral_dataset(&SpiralConfig { samples_per_class: 1000, seed: seed + 1000, ..Default::default() })
                .map_err(|e| e.to_string())?;
        let (mean, std) = train_set.moments();
        let (train_set, test_set) = (train_set.standardized_with(&mean, &std), test_set.standardized_with(&mean, &std));
        let cfg = TrainConfig { epochs: 50, batch_size: 16, seed, ..Default::default() };
        let mut acc = [0.0; 2];
        let mut params = [0usize; 2];
        for (i, kind) in [NetKind::Standard, NetKind::Nested].into_iter().enumerate() {
            let mut net = build_experiment_nets(20, 4, kind, seed).map_err(|e| e.to_string())?;
            params[i] = net.param_count();
            train(&mut net, &train_set, &test_set, &cfg).map_err(|e| e.to_string())?;
            acc[i] = evaluate_accuracy(&net, &test_set).map_err(|e| e.to_string())?;
        }
        ensure(params[1] == params[0] + 10, || format!("seed {seed}: params {} vs {}", params[1], params[0]))?;
        wins += (acc[1] >= acc[0]) as usize;
        all_above &= acc[0] > 0.60 && acc[1] > 0.60;
        lines.push(format!("seed {seed} standard {:.4} nested {:.4}", acc[0], acc[1]));
    }
    let rho_params = rho_initial().param_count().map_err(|e| e.to_string())?;
    let summary = format!(
        "nested >= standard in {wins}/5 seeds; {}; +{rho_params} params; {:.1}s",
        lines.join(", "),
        start.elapsed().as_secs_f64()
    );
    within_time(start, Duration::from_secs(600), "spiral runs")?;
    if wins >= 3 && all_above {
        Ok(summary)
    } else {
        Err(format!("accuracy threshold 0.60 not met by every run; {summary}"))
    }
}

fn round_trip(name: &str, net: &NestNet, inputs: &[Vec<Q>]) -> Result<(), String> {
    let bytes = serialize_net(net).map_err(|e| format!("{name}: {e}"))?;
    let back = deserialize_net(&bytes).map_err(|e| format!("{name}: {e}"))?;
    ensure(count(&back) == count(net), || format!("{name}: parameter count changed"))?;
    for x in inputs {
        let a = net.eval_exact(x).map_err(|e| format!("{name}: {e}"))?;
        let b = back.eval_exact(x).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, || format!("{name}: outputs differ at {x:?}"))?;
    }
    Ok(())
}

fn scalar_inputs(lo: i64, hi: i64) -> Vec<Vec<Q>> {
    (lo * 8..=hi * 8).step_by(3).map(|i| vec![q(i, 8)]).collect()
}

fn criterion_9() -> Outcome {
    let mut names = Vec::new();
    let mut run = |name: &str, net: NestNet, inputs: Vec<Vec<Q>>| -> Result<(), String> {
        round_trip(name, &net, &inputs)?;
        names.push(name.to_string());
        Ok(())
    };
    let err = |e: nestnet::constructive::ConstructError| e.to_string();
    run("floor_base", floor_base(2, &q(1, 8)).map_err(err)?, scalar_inputs(-1, 5))?;
    run("floor_nested", floor_nested(2, 2, &q(1, 128)).map_err(err)?, scalar_inputs(-1, 17))?;
    run("step_function", step_function_net(2, 2, &q(1, 8), 11).map_err(err)?, scalar_inputs(-1, 14))?;
    let pair_inputs: Vec<Vec<Q>> = (0..16).flat_map(|m| (0..=4).map(move |k| vec![q(m, 16), qint(k)])).collect();
    run("bit_pair", bit_pair_net(4).map_err(err)?, pair_inputs)?;
    let bit_inputs: Vec<Vec<Q>> = (0..8).flat_map(|m| (0..=3).map(move |k| vec![qint(k) + q(m, 8)])).collect();
    run("bit_extract_base", bit_extract_base(3).map_err(err)?, bit_inputs)?;
    let bit_inputs: Vec<Vec<Q>> = (0..16).flat_map(|m| (0..=4).map(move |k| vec![qint(k) + q(m, 16)])).collect();
    run("bit_extract", bit_extract_net(2, 2).map_err(err)?, bit_inputs)?;
    let theta = vec![vec![true, false, true, true], vec![false, true, true, false]];
    run("indexed_bit_sum", indexed_bit_sum_net(&theta, 2, 2).map_err(err)?, scalar_inputs(0, 8))?;
    let y: Vec<Q> = (0..8).map(|i| q((i * 5) % 7, 16)).collect();
    run("point_fit", point_fit_net(&y, &q(1, 2), 2, 2).map_err(err)?, scalar_inputs(-1, 9))?;
    let pwl: PiecewiseLinear1D =
        ExactPwl::new(vec![q(-1, 1), q(0, 1), q(1, 2)], vec![q(1, 1), q(0, 1), q(3, 4)], q(-1, 1), q(0, 1))
            .map_err(|e| e.to_string())?
            .into();
    run("cpl", cpl_to_net(&pwl).map_err(err)?, scalar_inputs(-3, 3))?;
    let pairs: Vec<Vec<Q>> = (-3..=3).flat_map(|a| (-3..=3).map(move |b| vec![q(a, 2), q(b, 3)])).collect();
    run("min", min_pair_net(), pairs.clone())?;
    run("max", max_pair_net(), pairs.clone())?;
    let triples: Vec<Vec<Q>> = pairs.iter().map(|p| vec![p[0].clone(), p[1].clone(), &p[0] - &p[1]]).collect();
    run("mid", mid_net(), triples)?;
    run("phi1_grid", phi1_grid_net(5, &q(1, 50), 2, 1).map_err(err)?, scalar_inputs(0, 1))?;
    let f1 = targets(1);
    let unit: Vec<Vec<Q>> = (0..=40).map(|i| vec![q(i, 40)]).collect();
    run("interior", approximator_interior(&f1, 2, 1, &q(1, 16)).map_err(err)?.net, unit.clone())?;
    run("full_p_finite", approximator_full(&f1, 3, 1, PNorm::Finite(2)).map_err(err)?.net, unit.clone())?;
    run("full_p_infinity", approximator_full(&f1, 2, 2, PNorm::Infinity).map_err(err)?.net, unit)?;
    let f2 = targets(2);
    let square: Vec<Vec<Q>> = (0..=10).flat_map(|i| (0..=10).map(move |j| vec![q(i, 10), q(j, 10)])).collect();
    run("full_p_infinity_2d", approximator_full(&f2, 2, 1, PNorm::Infinity).map_err(err)?.net, square)?;

    // float-backed trainable networks round-trip bit for bit
    for kind in [NetKind::Standard, NetKind::Nested] {
        let net = build_experiment_nets(6, 2, kind, 3).map_err(|e| e.to_string())?.to_net();
        let back = deserialize_net(&serialize_net(&net).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for x in [[0.25, -1.5], [3.0, 0.1], [-0.7, 0.7]] {
            let a = net.eval_f64(&x).map_err(|e| e.to_string())?;
            let b = back.eval_f64(&x).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{kind:?} classifier differs at {x:?}"))?;
        }
        names.push(format!("{kind:?} classifier").to_lowercase());
    }
    Ok(format!("{} builders: {}", names.len(), names.join(", ")))
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; nothing to list here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (id, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL {detail}");
            }
        }
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
