use bimha::{Tape, Tensor};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| Tensor::new(vec![rows, cols], v).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..5)
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions((r, c, _) in dims(), seed in any::<u64>()) {
        let v: Vec<f64> = (0..r * c).map(|i| ((seed.wrapping_mul(i as u64 + 7) % 1000) as f64 - 500.0) / 25.0).collect();
        let tape = Tape::new();
        let s = tape.constant(Tensor::new(vec![r, c], v).unwrap()).softmax(1).unwrap().value();
        for row in s.data().chunks(c) {
            prop_assert!(row.iter().all(|&p| p > 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_gradient_matches_closed_form(
        (a, b) in dims().prop_flat_map(|(m, k, n)| (matrix(m, k), matrix(k, n)))
    ) {
        let tape = Tape::new();
        let (va, vb) = (tape.param(a.clone()), tape.param(b.clone()));
        let g = tape.backward(va.matmul(vb).unwrap().sum()).unwrap();
        // d/dA sum(AB) = 1 B^T: every row is the row sums of B
        let (k, n) = (b.shape()[0], b.shape()[1]);
        let row_sums: Vec<f64> = (0..k).map(|i| (0..n).map(|j| b.at(i, j)).sum()).collect();
        for row in g.get(va).unwrap().data().chunks(k) {
            for (x, y) in row.iter().zip(&row_sums) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
        let col_sums: Vec<f64> = (0..k).map(|i| (0..a.shape()[0]).map(|r| a.at(r, i)).sum()).collect();
        for i in 0..k {
            for j in 0..n {
                prop_assert!((g.get(vb).unwrap().at(i, j) - col_sums[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concat_then_slice_recovers_parts(
        (x, y) in (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(r, c1, c2)| (matrix(r, c1), matrix(r, c2)))
    ) {
        let tape = Tape::new();
        let (vx, vy) = (tape.constant(x.clone()), tape.constant(y.clone()));
        let cat = tape.concat(&[vx, vy], 1).unwrap();
        let c1 = x.shape()[1];
        prop_assert_eq!(&*cat.slice(1, 0, c1).unwrap().value(), &x);
        prop_assert_eq!(&*cat.slice(1, c1, y.shape()[1]).unwrap().value(), &y);
    }

    #[test]
    fn row_outer_is_per_row_kronecker(
        (x, y) in (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(r, p, q)| (matrix(r, p), matrix(r, q)))
    ) {
        let tape = Tape::new();
        let z = tape.constant(x.clone()).row_outer(tape.constant(y.clone())).unwrap().value();
        let (p, q) = (x.shape()[1], y.shape()[1]);
        prop_assert_eq!(z.shape(), &[x.shape()[0], p * q][..]);
        for r in 0..x.shape()[0] {
            for i in 0..p {
                for j in 0..q {
                    prop_assert_eq!(z.at(r, i * q + j), x.at(r, i) * y.at(r, j));
                }
            }
        }
    }

    #[test]
    fn composite_gradient_matches_finite_difference(x in matrix(2, 3), w in matrix(3, 2)) {
        let f = |x: &Tensor<f64>| {
            let tape = Tape::new();
            let h = tape.constant(x.clone()).matmul(tape.constant(w.clone())).unwrap().tanh();
            h.log_softmax(1).unwrap().sum().value().item()
        };
        let tape = Tape::new();
        let vx = tape.param(x.clone());
        let out = vx.matmul(tape.constant(w.clone())).unwrap().tanh().log_softmax(1).unwrap().sum();
        let g = tape.backward(out).unwrap().get_or_zeros(vx);
        for i in 0..x.len() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up.data_mut()[i] += 1e-6;
            down.data_mut()[i] -= 1e-6;
            let numeric = (f(&up) - f(&down)) / 2e-6;
            prop_assert!((g.data()[i] - numeric).abs() < 1e-6 * numeric.abs().max(1.0));
        }
    }
}
