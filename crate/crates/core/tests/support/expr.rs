//! A tiny expression tree, used as an independent re-statement of every
//! closed-form bound. Formulas are built from named variables and evaluated
//! against an environment, so a transcription slip in the library and the
//! same slip here would have to happen twice, in different shapes.

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(&'static str),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Box<Expr>, Box<Expr>),
    Power(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Ln(Box<Expr>),
    Exp(Box<Expr>),
}

use Expr::*;

pub fn c(v: f64) -> Expr {
    Const(v)
}

pub fn v(name: &'static str) -> Expr {
    Var(name)
}

pub fn sum(terms: Vec<Expr>) -> Expr {
    Sum(terms)
}

pub fn prod(factors: Vec<Expr>) -> Expr {
    Product(factors)
}

pub fn div(a: Expr, b: Expr) -> Expr {
    Quotient(Box::new(a), Box::new(b))
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    Power(Box::new(a), Box::new(b))
}

pub fn sqrt(a: Expr) -> Expr {
    Sqrt(Box::new(a))
}

pub fn ln(a: Expr) -> Expr {
    Ln(Box::new(a))
}

pub fn exp(a: Expr) -> Expr {
    Exp(Box::new(a))
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    sum(vec![a, prod(vec![c(-1.0), b])])
}

pub type Env = HashMap<&'static str, f64>;

impl Expr {
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Const(x) => *x,
            Var(name) => *env.get(name).unwrap_or_else(|| panic!("unbound variable {name}")),
            Sum(ts) => ts.iter().map(|t| t.eval(env)).sum(),
            Product(fs) => fs.iter().map(|f| f.eval(env)).product(),
            Quotient(a, b) => a.eval(env) / b.eval(env),
            Power(a, b) => a.eval(env).powf(b.eval(env)),
            Sqrt(a) => a.eval(env).sqrt(),
            Ln(a) => a.eval(env).ln(),
            Exp(a) => a.eval(env).exp(),
        }
    }
}

/// Variables: b_spec, l_phi, l_max, r_x, k, loss_l, loss_c, m, delta, eps,
/// emp, t, r.
pub mod formulas {
    use super::*;

    pub fn l_model() -> Expr {
        prod(vec![v("b_spec"), pow(v("l_phi"), sub(v("l_max"), c(1.0)))])
    }

    pub fn rademacher() -> Expr {
        div(prod(vec![l_model(), v("r_x"), sqrt(v("k"))]), sqrt(v("m")))
    }

    pub fn log_inv_delta() -> Expr {
        prod(vec![c(-1.0), ln(v("delta"))])
    }

    pub fn generalization() -> Expr {
        sum(vec![
            v("emp"),
            prod(vec![c(2.0), rademacher()]),
            prod(vec![
                v("loss_c"),
                sqrt(div(log_inv_delta(), prod(vec![c(2.0), v("m")]))),
            ]),
        ])
    }

    pub fn capacity_term() -> Expr {
        prod(vec![
            c(4.0),
            pow(v("loss_l"), c(2.0)),
            pow(v("b_spec"), c(2.0)),
            pow(v("l_phi"), prod(vec![c(2.0), sub(v("l_max"), c(1.0))])),
            pow(v("r_x"), c(2.0)),
            v("k"),
        ])
    }

    pub fn mixed_term() -> Expr {
        prod(vec![
            c(4.0),
            v("loss_l"),
            v("b_spec"),
            pow(v("l_phi"), sub(v("l_max"), c(1.0))),
            v("r_x"),
            v("loss_c"),
            sqrt(v("k")),
            sqrt(div(log_inv_delta(), c(2.0))),
        ])
    }

    pub fn confidence_term() -> Expr {
        div(prod(vec![pow(v("loss_c"), c(2.0)), log_inv_delta()]), c(2.0))
    }

    pub fn bracket() -> Expr {
        sum(vec![capacity_term(), mixed_term(), confidence_term()])
    }

    pub fn next_token() -> Expr {
        div(bracket(), pow(v("eps"), c(2.0)))
    }

    pub fn sequence_prefactor() -> Expr {
        div(
            pow(l_model(), prod(vec![c(2.0), v("t")])),
            pow(sub(l_model(), c(1.0)), c(4.0)),
        )
    }

    pub fn sequence() -> Expr {
        prod(vec![sequence_prefactor(), next_token()])
    }

    pub fn multiround_prefactor() -> Expr {
        div(
            prod(vec![
                pow(l_model(), sum(vec![div(prod(vec![c(2.0), v("t")]), v("r")), c(2.0)])),
                pow(v("r"), c(2.0)),
            ]),
            pow(sub(l_model(), c(1.0)), c(4.0)),
        )
    }

    pub fn multiround() -> Expr {
        prod(vec![multiround_prefactor(), next_token()])
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}
