//! Seeded inputs shared by the benchmarks.

use ndarray::Array2;
use osr_core::model::{Architecture, ContextPooling, NetworkParams};
use osr_core::{LabelMatrix, RandomStream};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = RandomStream::new(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.normal())
}

pub fn labels(rows: usize, cols: usize, seed: u64) -> LabelMatrix {
    let mut rng = RandomStream::new(seed);
    LabelMatrix::new(Array2::from_shape_fn((rows, cols), |_| {
        f64::from(u8::from(rng.bernoulli(0.2)))
    }))
    .unwrap()
}

/// A network shaped like the default benchmark model: 32 inputs in two
/// context channels of width 4, 12 classes.
pub fn benchmark_network(seed: u64) -> (NetworkParams, ContextPooling) {
    let arch = Architecture {
        input_dim: 32,
        hidden: vec![64, 64],
        num_classes: 12,
        ..Default::default()
    };
    let params = NetworkParams::glorot(arch, &mut RandomStream::new(seed)).unwrap();
    let pooling = ContextPooling::grouped((24..32).collect(), 2).unwrap();
    (params, pooling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use osr_core::model::forward;

    #[test]
    fn fixtures_fit_together() {
        let (params, pooling) = benchmark_network(1);
        let x = gaussian(16, 32, 2);
        let out = forward(&params, x.view(), &pooling).unwrap();
        assert_eq!(out.alpha.dim(), (16, 12));
        assert_eq!(labels(16, 12, 3).ncols(), 12);
    }
}
