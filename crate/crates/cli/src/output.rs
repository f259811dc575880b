//! CSV, gnuplot and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use latelump::config::RunConfig;
use latelump::design::{ConvergenceRow, SpectrumRow};
use latelump::{Rect, SimTrace};

pub const MANIFEST: &str = "manifest.json";

/// Seventeen significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut s = String::from("re,im,residual,method,label\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", num(r.re), num(r.im), num(r.residual), r.method, r.label);
    }
    s
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("n,d_ctrl,d_obs,abscissa,modes,eigenvalues\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.n, num(r.d_ctrl), num(r.d_obs), num(r.abscissa), r.modes, r.eigenvalues);
    }
    s
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut s = String::from("t,u,y,yhat,state_norm,err_norm\n");
    for r in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            num(r.t),
            num(r.u),
            num(r.y),
            num(r.yhat),
            num(r.state_norm),
            num(r.err_norm)
        );
    }
    s
}

pub fn spectrum_plot(csv: &str, region: &Rect<f64>) -> String {
    format!(
        "set datafile separator ','\n\
         set key outside right\n\
         set grid\n\
         set xlabel 'Re {{/Symbol l}}'\n\
         set ylabel 'Im {{/Symbol l}}'\n\
         set xrange [{}:{}]\n\
         set yrange [{}:{}]\n\
         labels = 'closed-loop desired-ctrl desired-obs intermediate plant'\n\
         points = '7 6 4 1 2'\n\
         plot for [i=1:words(labels)] '{csv}' skip 1 \\\n    \
         using 1:(strcol(5) eq word(labels, i) ? $2 : NaN) \\\n    \
         with points pt int(word(points, i)) title word(labels, i)\n",
        region.re_min, region.re_max, region.im_min, region.im_max
    )
}

pub fn convergence_plot(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale y\n\
         set grid\n\
         set xlabel 'order n'\n\
         set ylabel 'distance to desired spectrum'\n\
         plot '{csv}' skip 1 using 1:2 with linespoints title 'd_ctrl', \\\n    \
         '{csv}' skip 1 using 1:3 with linespoints title 'd_obs'\n"
    )
}

pub fn trace_plot(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set multiplot layout 2,1\n\
         set grid\n\
         set logscale y\n\
         set ylabel 'norm'\n\
         plot '{csv}' skip 1 using 1:5 with lines title '||x||', \\\n    \
         '{csv}' skip 1 using 1:6 with lines title '||x_hat - x||'\n\
         unset logscale y\n\
         set xlabel 't'\n\
         set ylabel 'signal'\n\
         plot '{csv}' skip 1 using 1:2 with lines title 'u', \\\n    \
         '{csv}' skip 1 using 1:3 with lines title 'y', \\\n    \
         '{csv}' skip 1 using 1:4 with lines title 'y_hat'\n\
         unset multiplot\n"
    )
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    arguments: Value,
    config_source: String,
    config_sha256: String,
    parameters: Value,
    seed: u64,
    outputs: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, source: &str, seed: u64) -> Self {
        let canonical = cfg.to_toml_string();
        let hash = Sha256::digest(canonical.as_bytes());
        let p = &cfg.params;
        let derived = p.derive().ok();
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: String::new(),
            arguments: Value::Null,
            config_source: source.to_string(),
            config_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
            parameters: json!({
                "alpha": p.alpha,
                "beta": p.beta,
                "gamma": p.gamma,
                "mu_c": p.mu_c,
                "kappa_c": p.kappa_c,
                "mu_o": p.mu_o,
                "kappa_o": p.kappa_o,
                "gain_method": cfg.gains.method.to_string(),
                "theta_minus": cfg.gains.theta_minus,
                "tau": derived.map(|d| d.tau),
                "rho": derived.map(|d| d.rho),
                "k_ring": derived.map(|d| d.k_ring),
            }),
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn command(&mut self, name: &str, args: Value) {
        self.command = name.to_string();
        self.arguments = args;
    }

    pub fn outputs(&mut self, files: &[&str]) {
        self.outputs = files.iter().map(|f| f.to_string()).collect();
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.root.join(name), contents)
    }

    pub fn write_manifest(&self, m: &Manifest) -> io::Result<()> {
        let text = serde_json::to_string_pretty(m).map_err(io::Error::other)?;
        self.write(MANIFEST, &(text + "\n"))
    }
}
