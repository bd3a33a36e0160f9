use std::path::{Path, PathBuf};

use polarct::io::Metadata;
use polarct::{GridSpec, ScanGeometry, SolverConfig};

/// Every parameter of one invocation, echoed into output sidecars.
#[derive(Debug)]
pub struct RunConfig {
    pub command: &'static str,
    pub threads: Option<usize>,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub geometry: Option<ScanGeometry>,
    pub solver: Option<SolverConfig>,
    paths: Vec<(&'static str, PathBuf)>,
    params: Vec<(&'static str, String)>,
}

impl RunConfig {
    pub fn new(command: &'static str, threads: Option<usize>, seed: u64) -> Self {
        RunConfig {
            command,
            threads,
            seed,
            grid: None,
            geometry: None,
            solver: None,
            paths: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn path(&mut self, name: &'static str, p: &Path) {
        self.paths.push((name, p.to_path_buf()));
    }

    pub fn param(&mut self, name: &'static str, v: impl ToString) {
        self.params.push((name, v.to_string()));
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.set("run.program", concat!("polarct ", env!("CARGO_PKG_VERSION")));
        m.set("run.command", self.command);
        m.set("run.threads", self.threads.map_or("auto".to_string(), |t| t.to_string()));
        m.set("run.seed", self.seed);
        if let Some(g) = &self.grid {
            m.put_grid(g);
        }
        if let Some(g) = &self.geometry {
            m.put_geometry(g);
        }
        if let Some(s) = &self.solver {
            m.set("solver.beta", s.beta);
            m.set("solver.tolerance", s.tolerance);
            m.set("solver.max_sweeps", s.max_sweeps);
            m.set("solver.f_init", s.f_init);
            m.set("solver.p_floor", s.p_floor.map_or("auto".to_string(), |f| f.to_string()));
            m.set("solver.zero_lines", s.zero_lines.as_str());
        }
        for (k, p) in &self.paths {
            m.set(&format!("path.{k}"), p.display());
        }
        for (k, v) in &self.params {
            m.set(&format!("param.{k}"), v);
        }
        m
    }
}
