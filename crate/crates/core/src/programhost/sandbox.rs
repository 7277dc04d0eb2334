//! The restricted script engine heuristics run in.
//!
//! The engine has no module resolver, no `eval`, no clock and no I/O
//! functions, so a program can only compute on the values it is handed.
//! Wall-time limits are enforced from the progress callback: every 1024
//! operations the engine compares the monotonic clock against a deadline
//! that the host arms before each call.

use super::{ExecFailure, ExecStatus, HeuristicProgram};
use rhai::module_resolvers::DummyModuleResolver;
use rhai::packages::{Package, StandardPackage};
use rhai::{Array, CallFnOptions, Dynamic, Engine, EvalAltResult, OptimizationLevel, Scope, Shared, FLOAT, INT};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

/// Execution ceilings for heuristic programs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Limits {
    /// Per call of a matrix/vector heuristic.
    pub matrix_call: Duration,
    /// Per call of a constructive selector.
    pub selector_call: Duration,
    /// Summed selector time over one constructed solution.
    pub construction: Duration,
    /// Element ceiling for any single array value, nested arrays included.
    /// This is how the memory ceiling is approximated.
    pub max_array_size: usize,
    pub max_string_size: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            matrix_call: Duration::from_secs(10),
            selector_call: Duration::from_millis(50),
            construction: Duration::from_secs(10),
            // ~512 MB at 16 bytes per value plus vector overhead
            max_array_size: 16 << 20,
            max_string_size: 1 << 20,
        }
    }
}

const CHECK_EVERY: u64 = 1024;

fn clock_base() -> Instant {
    static BASE: OnceLock<Instant> = OnceLock::new();
    *BASE.get_or_init(Instant::now)
}

fn now_nanos() -> u64 {
    clock_base().elapsed().as_nanos() as u64
}

fn std_package() -> Shared<rhai::Module> {
    static PKG: OnceLock<Shared<rhai::Module>> = OnceLock::new();
    PKG.get_or_init(|| StandardPackage::new().as_shared_module()).clone()
}

// Rhai's defaults are lower in debug builds; pin them so that parse
// results do not depend on the build profile.
const MAX_EXPR_DEPTH: usize = 128;
const MAX_FN_EXPR_DEPTH: usize = 96;
const MAX_CALL_LEVELS: usize = 64;

fn configure(engine: &mut Engine, limits: &Limits) {
    engine.set_max_expr_depths(MAX_EXPR_DEPTH, MAX_FN_EXPR_DEPTH);
    engine.set_max_call_levels(MAX_CALL_LEVELS);
    engine.set_optimization_level(OptimizationLevel::None);
    engine.set_module_resolver(DummyModuleResolver::new());
    engine.disable_symbol("eval");
    engine.set_max_array_size(limits.max_array_size);
    engine.set_max_string_size(limits.max_string_size);
    engine.set_max_map_size(limits.max_array_size);
    engine.register_global_module(std_package());
    engine.on_print(|_| {});
    engine.on_debug(|_, _, _| {});
    register_numeric_helpers(engine, limits.max_array_size);
    register_exact_comparisons(engine);
}

/// Rhai's checked build compares floats with a relative epsilon, which makes
/// every comparison against infinity false. Programs get plain IEEE
/// comparisons instead; fast operators must be off for the overloads to win.
fn register_exact_comparisons(engine: &mut Engine) {
    engine.set_fast_operators(false);
    macro_rules! cmp {
        ($($op:tt),*) => {$(
            engine.register_fn(stringify!($op), |a: FLOAT, b: FLOAT| a $op b);
            engine.register_fn(stringify!($op), |a: FLOAT, b: INT| a $op b as FLOAT);
            engine.register_fn(stringify!($op), |a: INT, b: FLOAT| (a as FLOAT) $op b);
        )*};
    }
    cmp!(<, <=, >, >=, ==, !=);
}

/// Engine used only for compiling; shares the sandbox's symbol set.
pub(crate) fn parse_engine() -> &'static Engine {
    static ENGINE: OnceLock<Engine> = OnceLock::new();
    ENGINE.get_or_init(|| {
        let mut e = Engine::new_raw();
        configure(&mut e, &Limits::default());
        e
    })
}

/// One engine plus its deadline. Not meant to be shared between threads
/// that call concurrently: create one per worker.
pub struct Sandbox {
    engine: Engine,
    deadline: Arc<AtomicU64>,
    limits: Limits,
}

impl Sandbox {
    pub fn new(limits: Limits) -> Self {
        let mut engine = Engine::new_raw();
        configure(&mut engine, &limits);
        let deadline = Arc::new(AtomicU64::new(u64::MAX));
        let d = deadline.clone();
        engine.on_progress(move |ops| {
            if ops % CHECK_EVERY == 0 && now_nanos() > d.load(Ordering::Relaxed) {
                Some(Dynamic::UNIT)
            } else {
                None
            }
        });
        Self {
            engine,
            deadline,
            limits,
        }
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// Calls the program's entry function with `args` under `timeout`.
    pub fn call(
        &self,
        program: &HeuristicProgram,
        args: Vec<Dynamic>,
        timeout: Duration,
    ) -> Result<Dynamic, ExecFailure> {
        let start = now_nanos();
        self.deadline.store(
            start.saturating_add(timeout.as_nanos() as u64),
            Ordering::Relaxed,
        );
        let mut scope = Scope::new();
        let result = self.engine.call_fn_with_options::<Dynamic>(
            CallFnOptions::new().eval_ast(false).rewind_scope(true),
            &mut scope,
            program.ast(),
            program.entry_name(),
            args,
        );
        self.deadline.store(u64::MAX, Ordering::Relaxed);
        result.map_err(|e| classify(*e, timeout))
    }
}

fn classify(err: EvalAltResult, timeout: Duration) -> ExecFailure {
    match err {
        EvalAltResult::ErrorTerminated(..) => ExecFailure::new(
            ExecStatus::Timeout,
            format!("exceeded the {} ms wall-time limit", timeout.as_millis()),
        ),
        EvalAltResult::ErrorInFunctionCall(name, _, inner, pos) => {
            let inner = classify(*inner, timeout);
            if inner.status == ExecStatus::Timeout {
                inner
            } else {
                ExecFailure::new(
                    ExecStatus::RuntimeError,
                    format!("in call to `{name}` ({pos}): {}", inner.message),
                )
            }
        }
        other => ExecFailure::new(ExecStatus::RuntimeError, other.to_string()),
    }
}

fn as_num(v: &Dynamic) -> Result<FLOAT, Box<EvalAltResult>> {
    if let Ok(f) = v.as_float() {
        Ok(f)
    } else if let Ok(i) = v.as_int() {
        Ok(i as FLOAT)
    } else {
        Err(format!("expected a number, found {}", v.type_name()).into())
    }
}

fn nums(a: &Array) -> Result<Vec<FLOAT>, Box<EvalAltResult>> {
    a.iter().map(as_num).collect()
}

fn check_len(n: INT, what: &str) -> Result<usize, Box<EvalAltResult>> {
    usize::try_from(n).map_err(|_| format!("{what}: negative length {n}").into())
}

fn nonempty(v: Vec<FLOAT>, what: &str) -> Result<Vec<FLOAT>, Box<EvalAltResult>> {
    if v.is_empty() {
        Err(format!("{what} of an empty array").into())
    } else {
        Ok(v)
    }
}

fn arg_best(a: &Array, what: &str, better: fn(FLOAT, FLOAT) -> bool) -> Result<INT, Box<EvalAltResult>> {
    let v = nonempty(nums(a)?, what)?;
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if better(x, v[best]) {
            best = i;
        }
    }
    Ok(best as INT)
}

/// Small numeric array library exposed to programs.
fn register_numeric_helpers(engine: &mut Engine, max_elems: usize) {
    let filled = move |n: INT, m: Option<INT>, v: FLOAT| -> Result<Array, Box<EvalAltResult>> {
        let n = check_len(n, "zeros/full")?;
        match m {
            None => {
                if n > max_elems {
                    return Err("array too large".into());
                }
                Ok(vec![Dynamic::from_float(v); n])
            }
            Some(m) => {
                let m = check_len(m, "zeros/full")?;
                if n.saturating_mul(m) > max_elems {
                    return Err("array too large".into());
                }
                let row: Array = vec![Dynamic::from_float(v); m];
                Ok(vec![Dynamic::from_array(row); n])
            }
        }
    };
    engine.register_fn("zeros", move |n: INT| filled(n, None, 0.0));
    engine.register_fn("zeros", move |n: INT, m: INT| filled(n, Some(m), 0.0));
    engine.register_fn("full", move |n: INT, v: Dynamic| filled(n, None, as_num(&v)?));
    engine.register_fn("full", move |n: INT, m: INT, v: Dynamic| {
        filled(n, Some(m), as_num(&v)?)
    });
    engine.register_fn("sum", |a: Array| -> Result<FLOAT, Box<EvalAltResult>> {
        Ok(nums(&a)?.iter().sum())
    });
    engine.register_fn("mean", |a: Array| -> Result<FLOAT, Box<EvalAltResult>> {
        let v = nonempty(nums(&a)?, "mean")?;
        Ok(v.iter().sum::<FLOAT>() / v.len() as FLOAT)
    });
    engine.register_fn("std", |a: Array| -> Result<FLOAT, Box<EvalAltResult>> {
        let v = nonempty(nums(&a)?, "std")?;
        let m = v.iter().sum::<FLOAT>() / v.len() as FLOAT;
        Ok((v.iter().map(|x| (x - m) * (x - m)).sum::<FLOAT>() / v.len() as FLOAT).sqrt())
    });
    engine.register_fn("amin", |a: Array| -> Result<FLOAT, Box<EvalAltResult>> {
        Ok(nonempty(nums(&a)?, "amin")?.into_iter().fold(FLOAT::INFINITY, FLOAT::min))
    });
    engine.register_fn("amax", |a: Array| -> Result<FLOAT, Box<EvalAltResult>> {
        Ok(nonempty(nums(&a)?, "amax")?.into_iter().fold(FLOAT::NEG_INFINITY, FLOAT::max))
    });
    engine.register_fn("argmin", |a: Array| arg_best(&a, "argmin", |x, b| x < b));
    engine.register_fn("argmax", |a: Array| arg_best(&a, "argmax", |x, b| x > b));
    engine.register_fn("inf", || FLOAT::INFINITY);
}
