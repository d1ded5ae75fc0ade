use nalgebra::DVector;

use super::{Inputs, SimulationConfig, SimulationTrace};
use crate::error::{Error, Result};
use crate::sim::metrics::Metrics;
use crate::stability::{ClosedLoop, OUT_E, OUT_U, OUT_Y};

const SUBSTEPS: usize = 10;
const DIVERGENCE: f64 = 1e30;

struct Kernel<'a> {
    cl: &'a ClosedLoop,
    inputs: &'a Inputs,
    identity_jumps: bool,
    /// Sign of the last nonzero error; zero right after an exact zero.
    side: f64,
    events: Vec<f64>,
    event_errors: Vec<f64>,
    k: [DVector<f64>; 4],
    tmp: DVector<f64>,
}

impl<'a> Kernel<'a> {
    fn deriv(&self, t: f64, left: bool, x: &DVector<f64>, out: &mut DVector<f64>) {
        let w = self.inputs.at(t, left);
        self.cl.a.mul_to(x, out);
        for (j, wj) in w.iter().enumerate() {
            if *wj != 0.0 {
                out.axpy(*wj, &self.cl.b.column(j), 1.0);
            }
        }
    }

    /// One RK4 step from `a` to `b`; no input edge lies strictly inside.
    fn rk4(&mut self, x: &DVector<f64>, a: f64, b: f64) -> DVector<f64> {
        let h = b - a;
        let mid = a + 0.5 * h;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        self.deriv(a, false, x, &mut k[0]);
        tmp.copy_from(x);
        tmp.axpy(0.5 * h, &k[0], 1.0);
        self.deriv(mid, false, &tmp, &mut k[1]);
        tmp.copy_from(x);
        tmp.axpy(0.5 * h, &k[1], 1.0);
        self.deriv(mid, false, &tmp, &mut k[2]);
        tmp.copy_from(x);
        tmp.axpy(h, &k[2], 1.0);
        self.deriv(b, true, &tmp, &mut k[3]);
        let mut out = x.clone();
        out.axpy(h / 6.0, &k[0], 1.0);
        out.axpy(h / 3.0, &k[1], 1.0);
        out.axpy(h / 3.0, &k[2], 1.0);
        out.axpy(h / 6.0, &k[3], 1.0);
        self.k = k;
        self.tmp = tmp;
        out
    }

    fn output(&self, row: usize, x: &DVector<f64>, t: f64, left: bool) -> f64 {
        let w = self.inputs.at(t, left);
        let mut v = self.cl.c.row(row).dot(&x.transpose());
        for (j, wj) in w.iter().enumerate() {
            v += self.cl.d[(row, j)] * wj;
        }
        v
    }

    fn error(&self, x: &DVector<f64>, t: f64) -> f64 {
        self.output(OUT_E, x, t, true)
    }

    /// Whether reaching `e` completes a crossing, updating the side.
    fn crossed(&mut self, e: f64) -> bool {
        if e == 0.0 {
            let hit = self.side != 0.0;
            self.side = 0.0;
            return hit;
        }
        let s = e.signum();
        let hit = self.side != 0.0 && s != self.side;
        self.side = s;
        hit
    }

    fn jump(&self, x: &mut DVector<f64>) {
        for &i in &self.cl.reset_states {
            x[i] *= self.cl.jump[i];
        }
    }

    /// Records a reset at `t` where the flow state is `x`.
    fn log(&mut self, t: f64, x: &DVector<f64>) {
        if self.events.last().is_none_or(|&last| t > last) {
            self.events.push(t);
            self.event_errors.push(self.error(x, t));
        }
    }

    /// First zero of the error along the flow from `(x, a)` inside `[a, b]`,
    /// by the Illinois variant of regula falsi.
    fn locate(&mut self, x: &DVector<f64>, a: f64, b: f64, ea: f64, eb: f64) -> f64 {
        let (mut lo, mut hi, mut flo, mut fhi) = (a, b, ea, eb);
        if flo == 0.0 || flo.signum() == fhi.signum() {
            return b;
        }
        let tol = 1e-13 * flo.abs().max(fhi.abs());
        let mut last = 0i8;
        let mut t = b;
        for _ in 0..100 {
            t = (lo * fhi - hi * flo) / (fhi - flo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let xt = self.rk4(x, a, t);
            let f = self.error(&xt, t);
            if f.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
            if f.signum() == flo.signum() {
                lo = t;
                flo = f;
                if last == -1 {
                    fhi *= 0.5;
                }
                last = -1;
            } else {
                hi = t;
                fhi = f;
                if last == 1 {
                    flo *= 0.5;
                }
                last = 1;
            }
        }
        t
    }

    /// The located crossing and the flow state there, without touching the
    /// main integration.
    fn locate_state(&mut self, x: &DVector<f64>, a: f64, b: f64, ea: f64, eb: f64) -> (f64, DVector<f64>) {
        let t = self.locate(x, a, b, ea, eb);
        let xt = self.rk4(x, a, t);
        (t, xt)
    }

    /// Advances `x` from `a` to `b`, applying every reset on the way.
    fn advance(&mut self, x: &mut DVector<f64>, a: f64, b: f64) {
        let side = self.side;
        let xb = self.rk4(x, a, b);
        let eb = self.error(&xb, b);
        if !self.crossed(eb) {
            *x = xb;
            return;
        }
        if self.identity_jumps {
            // nothing moves, only the instant is logged
            let ea = self.error(x, a);
            let (t, xt) = if eb == 0.0 { (b, xb.clone()) } else { self.locate_state(x, a, b, ea, eb) };
            self.log(t, &xt);
            *x = xb;
            return;
        }
        self.side = side;
        let mut t = a;
        let mut xs = x.clone();
        for i in 1..=SUBSTEPS {
            let tb = if i == SUBSTEPS { b } else { a + (b - a) * i as f64 / SUBSTEPS as f64 };
            let mut guard = 0;
            while t < tb {
                let side = self.side;
                let ea = self.error(&xs, t);
                let xn = self.rk4(&xs, t, tb);
                let en = self.error(&xn, tb);
                if !self.crossed(en) {
                    xs = xn;
                    t = tb;
                    break;
                }
                guard += 1;
                if en == 0.0 || ea.signum() != side || guard > 8 {
                    // no usable bracket: reset at the end of the sub-step
                    xs = xn;
                    self.log(tb, &xs);
                    self.jump(&mut xs);
                    t = tb;
                    break;
                }
                let ts = self.locate(&xs, t, tb, ea, en);
                xs = self.rk4(&xs, t, ts);
                self.log(ts, &xs);
                self.jump(&mut xs);
                t = ts;
            }
        }
        *x = xs;
    }
}

/// Runs `cfg` from `x0` (rest when `None`).
pub fn simulate_from(cl: &ClosedLoop, cfg: &SimulationConfig, x0: Option<&DVector<f64>>) -> Result<SimulationTrace> {
    cfg.validate()?;
    let n = cl.n_states();
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::Dimension(format!("initial state has {} entries, loop has {n}", x0.len())))
        }
        Some(x0) => x0.clone(),
        None => DVector::zeros(n),
    };
    let inputs = Inputs::new(cfg)?;
    let breaks = inputs.breakpoints();
    let mut kernel = Kernel {
        cl,
        identity_jumps: cl.jumps_are_identity(),
        inputs: &inputs,
        side: 0.0,
        events: Vec::new(),
        event_errors: Vec::new(),
        k: std::array::from_fn(|_| DVector::zeros(n)),
        tmp: DVector::zeros(n),
    };
    let steps = cfg.n_steps();
    let mut trace = SimulationTrace {
        time: Vec::with_capacity(steps + 1),
        e: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        events: Vec::new(),
        event_errors: Vec::new(),
        metrics: Metrics::default(),
        final_state: DVector::zeros(0),
    };
    let record = |kernel: &Kernel, x: &DVector<f64>, t: f64, trace: &mut SimulationTrace| {
        trace.time.push(t);
        trace.e.push(kernel.output(OUT_E, x, t, false));
        trace.u.push(kernel.output(OUT_U, x, t, false));
        trace.y.push(kernel.output(OUT_Y, x, t, false));
    };
    record(&kernel, &x, 0.0, &mut trace);
    kernel.side = trace.e[0].signum();
    if trace.e[0] == 0.0 {
        kernel.side = 0.0;
    }
    let mut next_break = 0;
    for k in 1..=steps {
        let a = (k - 1) as f64 * cfg.step;
        let b = k as f64 * cfg.step;
        let mut t = a;
        while next_break < breaks.len() && breaks[next_break] <= a {
            next_break += 1;
        }
        while next_break < breaks.len() && breaks[next_break] < b {
            kernel.advance(&mut x, t, breaks[next_break]);
            t = breaks[next_break];
            next_break += 1;
        }
        kernel.advance(&mut x, t, b);
        if !x.iter().all(|v| v.is_finite()) || x.amax() > DIVERGENCE {
            return Err(Error::Divergence { time: b });
        }
        record(&kernel, &x, b, &mut trace);
    }
    trace.events = kernel.events;
    trace.event_errors = kernel.event_errors;
    trace.final_state = x;
    trace.metrics = Metrics::compute(&trace, cfg.window_start);
    Ok(trace)
}
