//! JSON model definitions.
//!
//! Matrices are written either as literal row lists or as expression strings:
//!
//! ```text
//! random_orthogonal(m, seed)   Haar-distributed orthogonal m×m
//! diag([d1, d2, ...])          diagonal matrix
//! identity(m), zeros(m)
//! scaled(c, X)                 c·X
//! conjugate(V, D)              Vᵀ D V
//! matmul(X, Y), add(X, Y), transpose(X)
//! NAME                         a matrix from the `bindings` table
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::models::{CopulaModel, GvarFamily, GvarModel, Model, Transform, VarModel, DEFAULT_NATURAL_PARAM_CLIP};
use super::rng::StreamRng;
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, Matrix};

/// A matrix in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixExpr {
    Literal(Vec<Vec<f64>>),
    Expr(String),
}

impl From<&str> for MatrixExpr {
    fn from(s: &str) -> Self {
        MatrixExpr::Expr(s.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Var {
        #[serde(default)]
        bindings: BTreeMap<String, MatrixExpr>,
        a: MatrixExpr,
        noise_cov: MatrixExpr,
    },
    Gvar {
        #[serde(default)]
        bindings: BTreeMap<String, MatrixExpr>,
        coeffs: MatrixExpr,
        family: GvarFamily,
        #[serde(default = "default_clip")]
        natural_param_clip: f64,
    },
    Copula {
        #[serde(default)]
        bindings: BTreeMap<String, MatrixExpr>,
        a: MatrixExpr,
        noise_cov: MatrixExpr,
        transforms: Vec<Transform>,
    },
}

fn default_clip() -> f64 {
    DEFAULT_NATURAL_PARAM_CLIP
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Var { bindings, a, noise_cov } => {
                let env = Env::new(bindings)?;
                Ok(VarModel::new(env.eval(a)?, env.eval(noise_cov)?)?.into())
            }
            ModelSpec::Gvar { bindings, coeffs, family, natural_param_clip } => {
                let env = Env::new(bindings)?;
                Ok(GvarModel::new(env.eval(coeffs)?, *family, *natural_param_clip)?.into())
            }
            ModelSpec::Copula { bindings, a, noise_cov, transforms } => {
                let env = Env::new(bindings)?;
                let skeleton = VarModel::new(env.eval(a)?, env.eval(noise_cov)?)?;
                Ok(CopulaModel::new(skeleton, transforms.clone())?.into())
            }
        }
    }

    pub fn build_shared(&self) -> Result<Arc<Model>> {
        self.build().map(Arc::new)
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// triangular factor's diagonal made positive.
pub fn random_orthogonal(m: usize, seed: u64) -> Matrix {
    let mut rng = StreamRng::new(seed);
    let mut g = Matrix::zeros(m, m);
    rng.fill_normal(g.as_mut_slice());
    orthonormalize(&g).expect("a Gaussian matrix has full rank almost surely")
}

/// Evaluates a matrix expression without bindings.
pub fn eval_matrix(expr: &MatrixExpr) -> Result<Matrix> {
    Env::new(&BTreeMap::new())?.eval(expr)
}

struct Env {
    values: BTreeMap<String, Matrix>,
}

impl Env {
    /// Bindings are evaluated in name order and may refer to earlier names.
    fn new(bindings: &BTreeMap<String, MatrixExpr>) -> Result<Self> {
        let mut env = Env { values: BTreeMap::new() };
        let mut pending: Vec<(&String, &MatrixExpr)> = bindings.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut last_err = None;
            pending.retain(|(name, expr)| match env.eval(expr) {
                Ok(m) => {
                    env.values.insert((*name).clone(), m);
                    false
                }
                Err(e) => {
                    last_err = Some(e);
                    true
                }
            });
            if pending.len() == before {
                return Err(last_err.unwrap_or_else(|| Error::Config("unresolvable bindings".into())));
            }
        }
        Ok(env)
    }

    fn eval(&self, expr: &MatrixExpr) -> Result<Matrix> {
        match expr {
            MatrixExpr::Literal(rows) => Matrix::from_rows(rows),
            MatrixExpr::Expr(s) => {
                let mut p = Parser { src: s.as_bytes(), pos: 0 };
                let node = p.node()?;
                p.skip_ws();
                if p.pos != p.src.len() {
                    return Err(p.error("trailing input"));
                }
                match self.apply(&node)? {
                    Value::Matrix(m) => Ok(m),
                    _ => Err(Error::Config(format!("`{s}` is not a matrix"))),
                }
            }
        }
    }

    fn apply(&self, node: &Node) -> Result<Value> {
        Ok(match node {
            Node::Number(x) => Value::Number(*x),
            Node::List(xs) => Value::List(xs.clone()),
            Node::Name(n) => Value::Matrix(
                self.values
                    .get(n)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown matrix `{n}`")))?,
            ),
            Node::Call(f, args) => {
                let args = args.iter().map(|a| self.apply(a)).collect::<Result<Vec<_>>>()?;
                Value::Matrix(call(f, &args)?)
            }
        })
    }
}

fn call(f: &str, args: &[Value]) -> Result<Matrix> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Config(format!("{f} takes {n} argument(s), got {}", args.len())))
        }
    };
    match f {
        "random_orthogonal" => {
            arity(2)?;
            Ok(random_orthogonal(args[0].count(f)?, args[1].count(f)? as u64))
        }
        "diag" => {
            arity(1)?;
            match &args[0] {
                Value::List(xs) => Ok(Matrix::diag(xs)),
                _ => Err(Error::Config("diag expects a list".into())),
            }
        }
        "identity" => {
            arity(1)?;
            Ok(Matrix::identity(args[0].count(f)?))
        }
        "zeros" => {
            arity(1)?;
            let m = args[0].count(f)?;
            Ok(Matrix::zeros(m, m))
        }
        "scaled" => {
            arity(2)?;
            Ok(args[1].matrix(f)?.scale(args[0].number(f)?))
        }
        "conjugate" => {
            arity(2)?;
            let v = args[0].matrix(f)?;
            let d = args[1].matrix(f)?;
            check_dims(f, v.rows() == d.rows() && d.is_square() && v.is_square())?;
            Ok(v.tr_matmul(d).matmul(v))
        }
        "matmul" => {
            arity(2)?;
            let (x, y) = (args[0].matrix(f)?, args[1].matrix(f)?);
            check_dims(f, x.cols() == y.rows())?;
            Ok(x.matmul(y))
        }
        "add" => {
            arity(2)?;
            let (x, y) = (args[0].matrix(f)?, args[1].matrix(f)?);
            check_dims(f, x.shape() == y.shape())?;
            Ok(x.add(y))
        }
        "transpose" => {
            arity(1)?;
            Ok(args[0].matrix(f)?.transpose())
        }
        _ => Err(Error::Config(format!("unknown function `{f}`"))),
    }
}

fn check_dims(f: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{f}: incompatible dimensions")))
    }
}

enum Value {
    Number(f64),
    List(Vec<f64>),
    Matrix(Matrix),
}

impl Value {
    fn number(&self, f: &str) -> Result<f64> {
        match self {
            Value::Number(x) => Ok(*x),
            _ => Err(Error::Config(format!("{f}: expected a number"))),
        }
    }

    fn count(&self, f: &str) -> Result<usize> {
        let x = self.number(f)?;
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Error::Config(format!("{f}: expected a non-negative integer, got {x}")))
        }
    }

    fn matrix(&self, f: &str) -> Result<&Matrix> {
        match self {
            Value::Matrix(m) => Ok(m),
            _ => Err(Error::Config(format!("{f}: expected a matrix"))),
        }
    }
}

#[derive(Debug)]
enum Node {
    Number(f64),
    List(Vec<f64>),
    Name(String),
    Call(String, Vec<Node>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Config(format!(
            "{what} at byte {} of `{}`",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn node(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut xs = Vec::new();
                if self.peek() != Some(b']') {
                    loop {
                        xs.push(self.number()?);
                        if self.peek() == Some(b',') {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(b']')?;
                Ok(Node::List(xs))
            }
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => {
                Ok(Node::Number(self.number()?))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(b')') {
                        loop {
                            args.push(self.node()?);
                            if self.peek() == Some(b',') {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(b')')?;
                    Ok(Node::Call(name, args))
                } else {
                    Ok(Node::Name(name))
                }
            }
            _ => Err(self.error("unexpected input")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && matches!(self.src[self.pos], b'0'..=b'9' | b'-' | b'+' | b'.' | b'e' | b'E')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.error("malformed number"))
    }
}
