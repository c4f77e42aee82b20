use proptest::prelude::*;
use rqc_core::circuit::{fsim, single_qubit_gate, FsimParams, GateKind, GateMatrix};
use rqc_core::rng::CounterRng;
use rqc_core::tensor::{contract_fused, contract_naive, KernelConfig, Label, Tensor, MAX_RANK};
use rqc_core::Complex32;

/// Random operand shapes: each of `n` labels goes to a only, b only, or both.
fn shapes() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
    (1usize..=12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = CounterRng::new(seed);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for id in 0..n as u32 {
            match rng.next_u64() % 3 {
                0 => a.push(Label(id)),
                1 => b.push(Label(id)),
                _ => {
                    a.push(Label(id));
                    b.push(Label(id));
                }
            }
        }
        // shuffle label orders
        for v in [&mut a, &mut b] {
            for i in (1..v.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                v.swap(i, j);
            }
        }
        (a, b)
    })
}

use rand::RngCore;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fused_equals_naive((la, lb) in shapes(), seed in any::<u64>(), batch_log2 in 0usize..14, resident_log2 in 0usize..16) {
        let mut rng = CounterRng::new(seed);
        let a = Tensor::random(la, &mut rng).unwrap();
        let b = Tensor::random(lb, &mut rng).unwrap();
        let reference = contract_naive(&a, &b, MAX_RANK).unwrap();
        let cfg = KernelConfig { batch_log2, resident_log2, ..Default::default() };
        match contract_fused(&a, &b, &cfg) {
            Ok(out) => {
                prop_assert_eq!(out.labels(), reference.labels());
                prop_assert!(out.relative_distance(&reference).unwrap() < 1e-6);
            }
            Err(e) => {
                let shared = a.labels().iter().filter(|l| b.labels().contains(l)).count();
                prop_assert!(shared > batch_log2, "unexpected {e:?}");
            }
        }
    }

    #[test]
    fn contraction_is_bilinear((la, lb) in shapes(), seed in any::<u64>(), re in -2.0f32..2.0, im in -2.0f32..2.0) {
        let mut rng = CounterRng::new(seed);
        let a = Tensor::random(la, &mut rng).unwrap();
        let b = Tensor::random(lb, &mut rng).unwrap();
        let alpha = Complex32::new(re, im);
        let cfg = KernelConfig::default();
        let lhs = contract_fused(&a.scaled(alpha), &b, &cfg).unwrap();
        let rhs = contract_fused(&a, &b, &cfg).unwrap().scaled(alpha);
        prop_assert!(lhs.relative_distance(&rhs).unwrap() < 1e-5);
        let lhs = contract_naive(&a, &b.scaled(alpha), MAX_RANK).unwrap();
        let rhs = contract_naive(&a, &b, MAX_RANK).unwrap().scaled(alpha);
        prop_assert!(lhs.relative_distance(&rhs).unwrap() < 1e-5);
    }

    #[test]
    fn permute_then_inverse_is_identity(seed in any::<u64>(), rank in 0usize..9) {
        let mut rng = CounterRng::new(seed);
        let labels: Vec<Label> = (0..rank as u32).map(Label).collect();
        let t = Tensor::random(labels.clone(), &mut rng).unwrap();
        let mut order = labels;
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let back = t.permute(&order).unwrap().permute(t.labels()).unwrap();
        prop_assert_eq!(back, t);
    }
}

/// Gate tensor with labels `[outs..., ins...]`.
fn gate_tensor(m: &GateMatrix, outs: &[u32], ins: &[u32]) -> Tensor {
    let labels = outs.iter().chain(ins).map(|&l| Label(l)).collect();
    let dim = m.dim();
    Tensor::from_fn(labels, |off| {
        let z = m.get(off / dim, off % dim);
        Complex32::new(z.re as f32, z.im as f32)
    })
    .unwrap()
}

#[test]
fn gate_then_adjoint_is_identity() {
    let mut gates: Vec<(GateMatrix, usize)> = [GateKind::SqrtX, GateKind::SqrtY, GateKind::SqrtW]
        .iter()
        .map(|&k| (single_qubit_gate(k), 1))
        .collect();
    gates.push((fsim(&FsimParams::default()), 2));
    gates.push((
        fsim(&FsimParams {
            theta: 0.3,
            phi: 1.1,
            delta_plus: 0.2,
            delta_minus: -0.7,
            delta_minus_off: 0.4,
        }),
        2,
    ));
    for (u, arity) in gates {
        let (ins, mids, outs): (Vec<u32>, Vec<u32>, Vec<u32>) = match arity {
            1 => (vec![0], vec![1], vec![2]),
            _ => (vec![0, 1], vec![2, 3], vec![4, 5]),
        };
        let first = gate_tensor(&u, &mids, &ins);
        let second = gate_tensor(&u.adjoint(), &outs, &mids);
        let prod = contract_fused(&second, &first, &KernelConfig::default()).unwrap();
        let identity = gate_tensor(&GateMatrix::identity(arity), &outs, &ins);
        assert!(prod.relative_distance(&identity).unwrap() < 1e-6);
    }
}
