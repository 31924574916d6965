//! Built-in instances.

use super::{LbpInstance, Sense};

/// The two-variable counterexample:
///
/// ```text
/// max_x  x + y
/// s.t.   0 <= x <= 2
///        y solves  min_y y  s.t.  y >= 0 (lambda_1),  x - 0.01 y <= 1 (lambda_2)
/// ```
///
/// Its bilevel optimum is `x = 2, y = 100, z = 102` with `lambda = (0, 100)`.
pub fn builtin_counterexample() -> LbpInstance {
    let mut inst = counterexample_family(0.01);
    inst.name = "counterexample".into();
    inst
}

/// The counterexample with the coupling coefficient `0.01` replaced by
/// `eps > 0`. The optimum is `x = 2, y = 1/eps` with `lambda_2 = 1/eps`, so a
/// small `eps` produces an arbitrarily large lower-level multiplier.
pub fn counterexample_family(eps: f64) -> LbpInstance {
    LbpInstance {
        name: format!("counterexample-eps-{eps}"),
        upper_sense: Sense::Maximize,
        lower_sense: Sense::Minimize,
        n: 1,
        m: 1,
        a: vec![1.0],
        b: vec![1.0],
        c: vec![vec![-1.0], vec![1.0]],
        d: vec![vec![0.0], vec![0.0]],
        e: vec![0.0, 2.0],
        p: vec![0.0],
        q: vec![1.0],
        r: vec![vec![0.0], vec![1.0]],
        s: vec![vec![-1.0], vec![-eps]],
        t: vec![0.0, 1.0],
    }
}

/// `min x + y` over `0 <= x <= 2` where the follower minimizes `y` subject to
/// `y >= 0`. The levels do not interact; the optimum is the origin.
pub fn decoupled_example() -> LbpInstance {
    LbpInstance {
        name: "decoupled".into(),
        upper_sense: Sense::Minimize,
        lower_sense: Sense::Minimize,
        n: 1,
        m: 1,
        a: vec![1.0],
        b: vec![1.0],
        c: vec![vec![-1.0], vec![1.0]],
        d: vec![vec![0.0], vec![0.0]],
        e: vec![0.0, 2.0],
        p: vec![0.0],
        q: vec![1.0],
        r: vec![vec![0.0]],
        s: vec![vec![-1.0]],
        t: vec![0.0],
    }
}

/// Looks up a catalog instance by name (`counterexample`, `decoupled`, or
/// `counterexample-eps-<eps>`).
pub fn by_name(name: &str) -> Option<LbpInstance> {
    match name {
        "counterexample" => Some(builtin_counterexample()),
        "decoupled" => Some(decoupled_example()),
        other => other
            .strip_prefix("counterexample-eps-")
            .and_then(|e| e.parse::<f64>().ok())
            .filter(|e| e.is_finite() && *e > 0.0)
            .map(counterexample_family),
    }
}
