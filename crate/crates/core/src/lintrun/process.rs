use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use log::debug;

use super::{AnalysisExecutor, AttemptOutcome, JavaVersion, RunStatus, Tool};

const DIAGNOSTIC_TAIL: usize = 4096;
const DEFAULT_SPOTBUGS_GOAL: &str = "com.github.spotbugs:spotbugs-maven-plugin:4.8.3.0:spotbugs";

/// Locations of the build tools. Read from the environment by
/// [`Toolchain::from_env`]:
///
/// - `METHODLINT_MVN` (default `mvn`)
/// - `METHODLINT_INFER` (default `infer`)
/// - `METHODLINT_JAVA8_HOME`, `METHODLINT_JAVA11_HOME`, `METHODLINT_JAVA17_HOME`
/// - `METHODLINT_SPOTBUGS_GOAL` (default: the 4.8.3.0 plugin goal)
#[derive(Debug, Clone)]
pub struct Toolchain {
    pub mvn: PathBuf,
    pub infer: PathBuf,
    pub java_homes: BTreeMap<JavaVersion, PathBuf>,
    pub spotbugs_goal: String,
}

impl Default for Toolchain {
    fn default() -> Self {
        Toolchain {
            mvn: PathBuf::from("mvn"),
            infer: PathBuf::from("infer"),
            java_homes: BTreeMap::new(),
            spotbugs_goal: DEFAULT_SPOTBUGS_GOAL.to_string(),
        }
    }
}

impl Toolchain {
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty());
        let mut tc = Toolchain::default();
        if let Some(v) = var("METHODLINT_MVN") {
            tc.mvn = v.into();
        }
        if let Some(v) = var("METHODLINT_INFER") {
            tc.infer = v.into();
        }
        if let Some(v) = var("METHODLINT_SPOTBUGS_GOAL") {
            tc.spotbugs_goal = v.to_string_lossy().into_owned();
        }
        for java in JavaVersion::ALL {
            if let Some(home) = var(&format!("METHODLINT_JAVA{}_HOME", java.number())) {
                tc.java_homes.insert(java, home.into());
            }
        }
        tc
    }

    /// Where the tool leaves its report for a build of `pom`.
    pub fn report_path(&self, tool: Tool, pom: &Path) -> PathBuf {
        let module = pom.parent().unwrap_or(Path::new("."));
        match tool {
            Tool::Infer => module.join("infer-out").join("report.json"),
            Tool::Spotbugs => module.join("target").join("spotbugsXml.xml"),
        }
    }

    pub fn command(&self, tool: Tool, java: JavaVersion, pom: &Path) -> Command {
        let module = pom.parent().unwrap_or(Path::new("."));
        let mut cmd = match tool {
            Tool::Infer => {
                let mut c = Command::new(&self.infer);
                c.arg("run")
                    .arg("--results-dir")
                    .arg(module.join("infer-out"))
                    .arg("--")
                    .arg(&self.mvn)
                    .args(["-B", "-q", "-f"])
                    .arg(pom)
                    .args(["clean", "compile"]);
                c
            }
            Tool::Spotbugs => {
                let mut c = Command::new(&self.mvn);
                c.args(["-B", "-q", "-f"])
                    .arg(pom)
                    .args(["-Dspotbugs.xmlOutput=true", "compile"])
                    .arg(&self.spotbugs_goal);
                c
            }
        };
        cmd.current_dir(module);
        if let Some(home) = self.java_homes.get(&java) {
            let mut path = OsString::from(home.join("bin"));
            if let Some(old) = std::env::var_os("PATH") {
                path.push(":");
                path.push(old);
            }
            cmd.env("JAVA_HOME", home).env("PATH", path);
        }
        cmd.env("METHODLINT_JAVA_VERSION", java.number().to_string());
        cmd
    }
}

#[derive(Debug)]
pub(crate) enum ProcessOutcome {
    Exited { success: bool, output: String },
    TimedOut { output: String },
    SpawnFailed(String),
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

fn tail(bytes: &[u8]) -> String {
    let start = bytes.len().saturating_sub(DIAGNOSTIC_TAIL);
    String::from_utf8_lossy(&bytes[start..]).into_owned()
}

fn kill_group(child: &mut Child) {
    // the child leads its own process group, so this reaches grandchildren too
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
    let _ = child.kill();
}

/// Runs `cmd` in its own process group, killing the whole group once
/// `timeout` elapses.
pub(crate) fn run_with_timeout(mut cmd: Command, timeout: Duration) -> ProcessOutcome {
    cmd.stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return ProcessOutcome::SpawnFailed(e.to_string()),
    };
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let deadline = Instant::now() + timeout;
    let mut poll = Duration::from_millis(5);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                kill_group(&mut child);
                let _ = child.wait();
                break None;
            }
            Ok(None) => {
                thread::sleep(poll.min(deadline.saturating_duration_since(Instant::now())));
                poll = (poll * 2).min(Duration::from_millis(250));
            }
            Err(e) => {
                kill_group(&mut child);
                let _ = child.wait();
                return ProcessOutcome::SpawnFailed(e.to_string());
            }
        }
    };
    let mut output = out.join().unwrap_or_default();
    output.extend(err.join().unwrap_or_default());
    let output = tail(&output);
    match status {
        Some(s) => ProcessOutcome::Exited {
            success: s.success(),
            output,
        },
        None => ProcessOutcome::TimedOut { output },
    }
}

fn looks_like_build_failure(output: &str) -> bool {
    ["BUILD FAILURE", "COMPILATION ERROR", "Could not resolve dependencies", "Non-resolvable"]
        .iter()
        .any(|m| output.contains(m))
}

/// Builds and analyzes with real processes, one per attempt.
#[derive(Debug, Clone, Default)]
pub struct MavenExecutor {
    pub toolchain: Toolchain,
}

impl MavenExecutor {
    pub fn new(toolchain: Toolchain) -> Self {
        MavenExecutor { toolchain }
    }
}

impl AnalysisExecutor for MavenExecutor {
    fn attempt(
        &self,
        _project_dir: &Path,
        tool: Tool,
        java: JavaVersion,
        pom: &Path,
        timeout: Duration,
    ) -> AttemptOutcome {
        let report_path = self.toolchain.report_path(tool, pom);
        // never pick up a report left behind by an earlier attempt
        let _ = std::fs::remove_file(&report_path);
        let cmd = self.toolchain.command(tool, java, pom);
        debug!("running {cmd:?}");
        let started = Instant::now();
        let outcome = run_with_timeout(cmd, timeout);
        let duration = started.elapsed();
        let (status, diagnostics) = match outcome {
            ProcessOutcome::TimedOut { output } => (RunStatus::Timeout, output),
            ProcessOutcome::SpawnFailed(e) => (RunStatus::ToolFail, e),
            ProcessOutcome::Exited { success: true, output } => (RunStatus::Ok, output),
            ProcessOutcome::Exited { success: false, output } => {
                if looks_like_build_failure(&output) {
                    (RunStatus::BuildFail, output)
                } else {
                    (RunStatus::ToolFail, output)
                }
            }
        };
        let report = if status == RunStatus::Ok {
            std::fs::read(&report_path).ok()
        } else {
            None
        };
        AttemptOutcome {
            status,
            report,
            diagnostics,
            duration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(script: &str) -> Command {
        let mut c = Command::new("sh");
        c.arg("-c").arg(script);
        c
    }

    #[test]
    fn exit_status_and_output() {
        match run_with_timeout(sh("echo hello; echo oops >&2; exit 3"), Duration::from_secs(5)) {
            ProcessOutcome::Exited { success, output } => {
                assert!(!success);
                assert!(output.contains("hello") && output.contains("oops"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn timeout_kills_process_tree() {
        let started = Instant::now();
        // the background sleep keeps the pipe open unless the group is killed
        let outcome = run_with_timeout(sh("sleep 30 & sleep 30"), Duration::from_millis(300));
        assert!(matches!(outcome, ProcessOutcome::TimedOut { .. }));
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn missing_binary() {
        assert!(matches!(
            run_with_timeout(Command::new("/nonexistent/methodlint-tool"), Duration::from_secs(1)),
            ProcessOutcome::SpawnFailed(_)
        ));
    }

    #[test]
    fn report_locations() {
        let tc = Toolchain::default();
        assert_eq!(
            tc.report_path(Tool::Spotbugs, Path::new("/p/sub/pom.xml")),
            PathBuf::from("/p/sub/target/spotbugsXml.xml")
        );
        assert_eq!(
            tc.report_path(Tool::Infer, Path::new("/p/pom.xml")),
            PathBuf::from("/p/infer-out/report.json")
        );
    }
}
