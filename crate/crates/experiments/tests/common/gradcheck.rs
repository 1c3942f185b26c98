use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squashscope::graph::{generate, GraphKind};
use squashscope::NodePair;
use squashscope_experiments::{GraphTensor, Instance, Network, Template};

/// Worst relative ∞-norm gap between analytic and central-difference loss gradients.
pub fn worst_gradient_error(template: Template, cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.gen_range(5..=9);
        let g = generate(&GraphKind::MoleculeLike { n, extra_cycles: 1 }, rng.gen()).unwrap();
        let tensors = vec![GraphTensor::new(&g, template.kind()).unwrap()];
        let mut net = Network::new(
            template,
            rng.gen_range(2..=4),
            rng.gen_range(1..=3),
            1.0,
            rng.gen(),
            0.1,
        )
        .unwrap();
        // Zero biases make feature-free nodes tie exactly at a kink of the MAX readout.
        net.params
            .iter_mut()
            .for_each(|p| *p = rng.gen_range(-1.0..1.0));
        let batch: Vec<Instance> = (0..3)
            .map(|_| {
                let v = rng.gen_range(0..n);
                let u = (v + rng.gen_range(1..n)) % n;
                Instance {
                    graph: 0,
                    pair: NodePair::new(v, u),
                    values: (rng.gen(), rng.gen()),
                    target: rng.gen_range(-3.0..3.0),
                }
            })
            .collect();
        let refs: Vec<&Instance> = batch.iter().collect();
        let (_, grad) = net.loss_and_grad(&tensors, &refs);
        let h = 1e-6;
        let mut fd = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            let keep = net.params[i];
            net.params[i] = keep + h;
            let up = net.loss(&tensors, &refs);
            net.params[i] = keep - h;
            let down = net.loss(&tensors, &refs);
            net.params[i] = keep;
            fd[i] = (up - down) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
        let gap = grad
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(gap / scale);
    }
    worst
}
