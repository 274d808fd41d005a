//! Reverse-mode training of float networks with shared sub-network activations, and the
//! two-spiral toy experiment.

mod experiment;
mod spiral;
mod trainable;

pub use experiment::{
    build_classifier, build_experiment_nets, evaluate_accuracy, rho_initial, rho_net, train, EpochRecord, NetKind,
    Optimizer, TrainConfig,
};
pub use spiral::{spiral_dataset, Dataset, SpiralConfig};
pub use trainable::{gradient_check, GradCheck, TrainableNet};

use thiserror::Error;

use crate::ir::IrError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss{}", .epoch.map(|e| format!(" in epoch {e}")).unwrap_or_default())]
    NonFinite { epoch: Option<usize> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample shape mismatch: expected {expected} features, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::NetId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_batch(seed: u64, m: usize, dim: usize) -> Vec<(Vec<f64>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|i| ((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), i % 2)).collect()
    }

    fn view(b: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
        b.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
    }

    #[test]
    fn experiment_param_counts() {
        for (w, std) in [(20, 1362), (35, 3957)] {
            let a = build_experiment_nets(w, 4, NetKind::Standard, 0).unwrap();
            let b = build_experiment_nets(w, 4, NetKind::Nested, 0).unwrap();
            assert_eq!(a.param_count(), std);
            assert_eq!(b.param_count(), std + 10);
            assert_eq!(b.to_net().param_count().unwrap(), std + 10);
        }
    }

    #[test]
    fn rho_at_init() {
        // w1·σ(w0·0 + b0) + b1 = σ(-0.2) + σ(-0.1) - σ(0) = 0; at 1: 0.8 + 0.9 - 1 = 0.7
        let rho = TrainableNet::from_net(&rho_initial()).unwrap();
        assert_eq!(rho.forward(&[0.0]), vec![0.0]);
        assert!((rho.forward(&[1.0])[0] - 0.7).abs() < 1e-15);
        assert_eq!(rho.param_count(), 10);
    }

    #[test]
    fn zero_output_layer_gives_ln2() {
        let mut net = build_experiment_nets(6, 2, NetKind::Nested, 3).unwrap();
        let root: NetId = net.root_id();
        let last = net.slot(root, 2, 0).unwrap();
        for p in &mut net.params_mut()[last..last + 2 * 7] {
            *p = 0.0;
        }
        let b = random_batch(1, 8, 2);
        let (loss, _) = net.forward_backward(&view(&b)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let net = build_experiment_nets(5, 3, NetKind::Nested, 9).unwrap();
        let b = random_batch(2, 6, 2);
        let mut bb = b.clone();
        bb.extend(b.clone());
        let (l1, g1) = net.forward_backward(&view(&b)).unwrap();
        let (l2, g2) = net.forward_backward(&view(&bb)).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(net.forward_backward(&[]), Err(TrainError::EmptyBatch));
    }

    #[test]
    fn shared_gradient_matches_differences() {
        let net = build_experiment_nets(4, 2, NetKind::Nested, 5).unwrap();
        let b = random_batch(4, 5, 2);
        let (_, rho) = net.shared_blocks()[0].clone();
        let slots: Vec<usize> = rho.chain(0..6).collect();
        for c in gradient_check(&net, &view(&b), &slots, 1e-4).unwrap() {
            assert!(c.rel_err <= 1e-4, "{c:?}");
        }
    }

    #[test]
    fn training_is_deterministic_and_zero_epochs_is_noop() {
        let data = spiral_dataset(&SpiralConfig { samples_per_class: 100, seed: 1, turns: 2.0, ..Default::default() })
            .unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 32, ..Default::default() };
        let mut a = build_experiment_nets(8, 2, NetKind::Nested, 0).unwrap();
        let mut b = a.clone();
        let ha = train(&mut a, &data, &data, &cfg).unwrap();
        let hb = train(&mut b, &data, &data, &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.params(), b.params());
        let before = a.params().to_vec();
        assert!(train(&mut a, &data, &data, &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap().is_empty());
        assert_eq!(a.params(), &before[..]);
    }

    #[test]
    fn staircase_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 0.002);
        assert_eq!(cfg.lr_at(5), 0.002);
        assert!((cfg.lr_at(7) - 0.002 * 0.9).abs() < 1e-18);
        assert!((cfg.lr_at(11) - 0.002 * 0.81).abs() < 1e-18);
        assert!(TrainConfig { decay: 1.5, ..cfg }.validate().is_err());
    }

    #[test]
    fn accuracy_of_trivial_classifiers() {
        let data = Dataset { x: vec![vec![1.0], vec![-1.0], vec![2.0], vec![-3.0]], y: vec![1, 0, 1, 0] };
        let perfect = TrainableNet::from_net(&crate::ir::NestNet::affine(crate::ir::AffineMap::float(
            2,
            1,
            vec![-1.0, 1.0],
            vec![0.0, 0.0],
        )))
        .unwrap();
        assert_eq!(evaluate_accuracy(&perfect, &data).unwrap(), 1.0);
        let constant = TrainableNet::from_net(&crate::ir::NestNet::affine(crate::ir::AffineMap::float(
            2,
            1,
            vec![0.0, 0.0],
            vec![0.0, 0.0],
        )))
        .unwrap();
        assert_eq!(evaluate_accuracy(&constant, &data).unwrap(), 0.5);
        let empty = Dataset { x: vec![], y: vec![] };
        assert_eq!(evaluate_accuracy(&constant, &empty), Err(TrainError::EmptyDataset));
    }
}
