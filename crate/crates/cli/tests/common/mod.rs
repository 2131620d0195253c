#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_scalebench");
pub const TOKEN: &str = "acceptance-token";

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn sb(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("SB_CONFIG")
        .env_remove("SB_ENDPOINT")
        .env_remove("SB_TOKEN")
        .env_remove("SB_PORT")
        .output()
        .expect("spawn scalebench")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A `scalebench serve` child process, stopped with SIGTERM on drop.
pub struct Server {
    pub child: Child,
    pub url: String,
}

impl Server {
    pub fn start(dir: &Path, data: &str) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--listen", "127.0.0.1:0", "--data", data, "--token", TOKEN])
            .current_dir(dir)
            .env_remove("SB_PORT")
            .env_remove("SB_CONFIG")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected: {line:?}"));
        Server { url: format!("http://{addr}"), child }
    }

    /// Sends SIGTERM and waits; true if the process exited cleanly.
    pub fn stop(mut self) -> bool {
        self.terminate()
    }

    fn terminate(&mut self) -> bool {
        let pid = self.child.id().to_string();
        let sent = Command::new("kill").args(["-TERM", &pid]).status().is_ok_and(|s| s.success());
        if !sent {
            let _ = self.child.kill();
        }
        self.child.wait().is_ok_and(|s| s.success())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.terminate();
        }
    }
}

/// A minimal HPL stdout capture with one result row.
pub fn hpl_output(n: u64, p: u64, q: u64, seconds: f64, gflops: f64) -> String {
    format!(
        "================================================================================\n\
         T/V                N    NB     P     Q               Time                 Gflops\n\
         --------------------------------------------------------------------------------\n\
         WR11C2R4  {n:>10} {:>5} {p:>5} {q:>5} {seconds:>18.2} {gflops:>22.6e}\n\
         --------------------------------------------------------------------------------\n\
         ||Ax-b||_oo/(eps*(||A||_oo*||x||_oo+||b||_oo)*N)=   3.47164021e-03 ...... PASSED\n\
         ================================================================================\n",
        192
    )
}

pub const REPLAY_CONFIG: &str = r#"
store = "results.jsonl"

[site]
id = "placeholder"

[defaults]
node_list = [1, 2, 4, 8]
ppn = 16
runner = "replay"

[[cases]]
family = "hpl"
case_name = "hpl-demo"
"#;
