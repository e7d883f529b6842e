use lexdyn::control::Mode;
use lexdyn::sim::{LogRow, TrajectoryLog};
use lexdyn_cli::csvlog;
use nalgebra::DVector;
use proptest::prelude::*;

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3f64..1e3, -1e-6f64..1e-6, Just(0.0), (-300i32..300).prop_map(|e| 10f64.powi(e))]
}

fn log() -> impl Strategy<Value = TrajectoryLog<f64>> {
    (1usize..4, 1usize..4, 1usize..6).prop_flat_map(|(n, p, len)| {
        prop::collection::vec(
            (
                0.0f64..100.0,
                prop::collection::vec(value(), 4 * n),
                prop::collection::vec(0.0f64..1e3, p),
                prop::collection::vec(any::<bool>(), p),
                0usize..100,
                0u64..10_000,
            )
                .prop_map(move |(t, v, wnorm, modes, asiter, solve_us)| LogRow {
                    t,
                    q: DVector::from_column_slice(&v[..n]),
                    qd: DVector::from_column_slice(&v[n..2 * n]),
                    qdd: DVector::from_column_slice(&v[2 * n..3 * n]),
                    tau: DVector::from_column_slice(&v[3 * n..]),
                    wnorm,
                    mode: modes.into_iter().map(|b| if b { Mode::Newton } else { Mode::Gn }).collect(),
                    asiter,
                    solve_us,
                }),
            len,
        )
        .prop_map(|rows| TrajectoryLog { rows })
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(1.0)
}

proptest! {
    #[test]
    fn round_trip(log in log()) {
        let text = csvlog::to_string(&log);
        let back = csvlog::read_log(text.as_bytes()).unwrap();
        prop_assert_eq!(back.len(), log.len());
        for (a, b) in log.rows.iter().zip(&back.rows) {
            prop_assert!(close(a.t, b.t));
            for (x, y) in [(&a.q, &b.q), (&a.qd, &b.qd), (&a.qdd, &b.qdd), (&a.tau, &b.tau)] {
                prop_assert!(x.iter().zip(y.iter()).all(|(u, v)| close(*u, *v)));
            }
            prop_assert!(a.wnorm.iter().zip(&b.wnorm).all(|(u, v)| close(*u, *v)));
            prop_assert_eq!(&a.mode, &b.mode);
            prop_assert_eq!((a.asiter, a.solve_us), (b.asiter, b.solve_us));
        }
        // writing the parsed log again is a fixed point
        prop_assert_eq!(csvlog::to_string(&back), text);
    }
}
