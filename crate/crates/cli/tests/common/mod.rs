#![allow(dead_code)]

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_xvmpc");

pub fn xvmpc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn xvmpc")
}

pub fn ok(args: &[&str]) -> String {
    let out = xvmpc(args);
    assert!(
        out.status.success(),
        "xvmpc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn free_ports(n: usize) -> Vec<u16> {
    let ls: Vec<TcpListener> = (0..n).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    ls.iter().map(|l| l.local_addr().unwrap().port()).collect()
}

/// A working directory with a model, features and dealt material.
pub struct Setup {
    pub dir: PathBuf,
    pub scheme: &'static str,
    pub mode: &'static str,
    pub weights: PathBuf,
    pub features: PathBuf,
    pub material: PathBuf,
}

pub const SMALL: [&str; 6] = ["--width", "32", "--pooled", "48", "--embed", "16"];

impl Setup {
    pub fn new(dir: &Path, scheme: &'static str, mode: &'static str, frames: usize, seed: u64) -> Setup {
        Setup::with_arch(dir, scheme, mode, frames, seed, &SMALL)
    }

    pub fn with_arch(
        dir: &Path,
        scheme: &'static str,
        mode: &'static str,
        frames: usize,
        seed: u64,
        arch: &[&str],
    ) -> Setup {
        fs::create_dir_all(dir).unwrap();
        let s = Setup {
            dir: dir.to_path_buf(),
            scheme,
            mode,
            weights: dir.join("model.xvw"),
            features: dir.join("features.xvf"),
            material: dir.join("material"),
        };
        let seed_s = seed.to_string();
        let mut gm = vec!["gen-model", "--seed", &seed_s, "--out", p(&s.weights)];
        gm.extend_from_slice(arch);
        ok(&gm);
        let fseed = (seed + 1).to_string();
        let frames_s = frames.to_string();
        ok(&["gen-features", "--frames", &frames_s, "--seed", &fseed, "--out", p(&s.features)]);
        s.deal(&s.material, seed + 2);
        s
    }

    pub fn frames(&self) -> usize {
        let dm: Value = serde_json::from_str(&fs::read_to_string(self.material.join("dealer.json")).unwrap()).unwrap();
        dm["frames"].as_u64().unwrap() as usize
    }

    pub fn deal(&self, out: &Path, seed: u64) {
        let frames = {
            let f = xvmpc_core::xvector::load_features(&self.features).unwrap();
            f.frames.to_string()
        };
        let seed = seed.to_string();
        ok(&[
            "dealer", "--scheme", self.scheme, "--mode", self.mode, "--graph", p(&self.weights),
            "--frames", &frames, "--seed", &seed, "--out", p(out),
        ]);
    }

    pub fn parties(&self) -> usize {
        if self.scheme == "rss3" { 3 } else { 2 }
    }

    /// Writes one TOML config per party on fresh ports.
    pub fn configs(&self, material: &Path) -> Vec<PathBuf> {
        let n = self.parties();
        let peers: Vec<String> = free_ports(n).iter().map(|p| format!("\"127.0.0.1:{p}\"")).collect();
        (0..n)
            .map(|i| {
                let path = self.dir.join(format!("party{i}.toml"));
                let text = format!(
                    "party_id = {i}\nscheme = \"{}\"\ntrunc = \"{}\"\npeers = [{}]\nmaterial = \"{}\"\ntimeout_ms = 60000\n",
                    self.scheme,
                    self.mode,
                    peers.join(", "),
                    material.display()
                );
                fs::write(&path, text).unwrap();
                path
            })
            .collect()
    }

    pub fn spawn_party(&self, i: usize, config: &Path, out: &Path, shares: bool) -> Child {
        let mut cmd = Command::new(BIN);
        cmd.args(["party", "--id", &i.to_string(), "--config", p(config), "--out", p(out)]);
        if i == 1 {
            cmd.args(["--weights", p(&self.weights)]);
        }
        if i == 0 {
            cmd.args(["--features", p(&self.features)]);
        }
        if shares {
            cmd.arg("--shares");
        }
        cmd.stdout(Stdio::null()).stderr(Stdio::piped()).spawn().unwrap()
    }

    /// All parties as separate processes over localhost TCP.
    pub fn run_tcp(&self, out: &Path, shares: bool) -> Vec<Output> {
        self.run_tcp_with(&self.material, out, shares)
    }

    pub fn run_tcp_with(&self, material: &Path, out: &Path, shares: bool) -> Vec<Output> {
        let configs = self.configs(material);
        let children: Vec<Child> = (0..self.parties())
            .map(|i| self.spawn_party(i, &configs[i], out, shares))
            .collect();
        children.into_iter().map(|c| c.wait_with_output().unwrap()).collect()
    }

    pub fn report(&self, out: &Path, party: usize) -> Value {
        read_json(&out.join(format!("party{party}.report.json")))
    }
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn assert_all_ok(outs: &[Output]) {
    for (i, o) in outs.iter().enumerate() {
        assert!(o.status.success(), "party {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

/// Drops the last record of party `party`'s largest pool, keeping the file valid.
pub fn remove_one_record(material: &Path, party: usize) -> String {
    let dm = read_json(&material.join("dealer.json"));
    let entry = dm["files"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["party"] == party && f["key"]["kind"] != "Seeds")
        .max_by_key(|f| f["count"].as_u64().unwrap())
        .unwrap()
        .clone();
    let path = material.join(format!("party{party}")).join(entry["file"].as_str().unwrap());
    let mut bytes = fs::read(&path).unwrap();
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let elems = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    bytes[12..20].copy_from_slice(&(count - 1).to_le_bytes());
    bytes.truncate(bytes.len() - elems * 8);
    fs::write(&path, bytes).unwrap();
    entry["file"].as_str().unwrap().to_string()
}

/// Every file under `dir`, by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
