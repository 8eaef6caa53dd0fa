use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{parse_sanitizer_report, precheck, ExecutionResult, Executor, ExecutorError, FuzzDriver};

fn default_grace() -> u64 {
    60
}

fn default_driver_name() -> String {
    "fuzz_driver.cc".to_string()
}

/// Runs a project's own build and fuzz commands through `sh -c`.
///
/// Both commands run in the trial's work directory with `FUZZ_DRIVER` (path
/// of the written driver), `WORK_DIR` and `FUZZ_DURATION_S` in the
/// environment. `coverage_file` (relative to the work directory) must hold a
/// single fraction in [0, 1] after fuzzing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalBuild {
    pub build_cmd: String,
    pub fuzz_cmd: String,
    pub coverage_file: PathBuf,
    /// Seconds allowed past the fuzz duration before the run is killed.
    #[serde(default = "default_grace")]
    pub grace_s: u64,
    #[serde(default = "default_driver_name")]
    pub driver_file: String,
}

struct Finished {
    status: i32,
    output: String,
}

fn run_shell(cmd: &str, dir: &Path, env: &[(&str, String)], cap: Option<Duration>) -> Result<Finished, ExecutorError> {
    let mut command = Command::new("sh");
    command
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        command.env(k, v);
    }
    let mut child = command.spawn().map_err(|e| ExecutorError::io(dir, e))?;
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = out.read_to_end(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = err.read_to_end(&mut s);
        s
    });
    let status = match cap {
        Some(limit) => match child.wait_timeout(limit).map_err(|e| ExecutorError::io(dir, e))? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ExecutorError::ExecutorTimeout(limit));
            }
        },
        None => child.wait().map_err(|e| ExecutorError::io(dir, e))?,
    };
    let mut output = out_reader.join().unwrap_or_default();
    output.extend(err_reader.join().unwrap_or_default());
    Ok(Finished {
        status: status.code().unwrap_or(-1),
        output: String::from_utf8_lossy(&output).into_owned(),
    })
}

fn tail(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

impl Executor for ExternalBuild {
    fn execute(
        &self,
        driver: &FuzzDriver,
        duration_s: f64,
        work_dir: &Path,
    ) -> Result<ExecutionResult, ExecutorError> {
        precheck(driver)?;
        fs::create_dir_all(work_dir).map_err(|e| ExecutorError::io(work_dir, e))?;
        let driver_path = work_dir.join(&self.driver_file);
        fs::write(&driver_path, &driver.source).map_err(|e| ExecutorError::io(&driver_path, e))?;
        let env = [
            ("FUZZ_DRIVER", driver_path.display().to_string()),
            ("WORK_DIR", work_dir.display().to_string()),
            ("FUZZ_DURATION_S", format!("{duration_s}")),
        ];

        let build = run_shell(&self.build_cmd, work_dir, &env, None)?;
        if build.status != 0 {
            return Err(ExecutorError::BuildFailure(tail(&build.output, 4096).to_string()));
        }

        let cap = Duration::from_secs_f64(duration_s.max(0.0)) + Duration::from_secs(self.grace_s);
        let started = Instant::now();
        let fuzz = run_shell(&self.fuzz_cmd, work_dir, &env, Some(cap))?;
        let elapsed = started.elapsed().as_secs_f64();

        let crash = match parse_sanitizer_report(&fuzz.output) {
            Ok(c) => Some(c),
            Err(ExecutorError::NoCrashFound) => None,
            Err(e) => return Err(e),
        };
        let cov_path = work_dir.join(&self.coverage_file);
        let coverage = match fs::read_to_string(&cov_path) {
            Ok(text) => {
                let v: f64 = text.trim().parse().map_err(|_| {
                    ExecutorError::Config(format!(
                        "{} does not hold a single fraction",
                        cov_path.display()
                    ))
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ExecutorError::Config(format!(
                        "coverage {v} in {} is outside [0, 1]",
                        cov_path.display()
                    )));
                }
                v
            }
            Err(e) if crash.is_some() => {
                tracing::warn!(path = %cov_path.display(), error = %e, "no coverage after crash; reporting 0");
                0.0
            }
            Err(e) => return Err(ExecutorError::io(&cov_path, e)),
        };
        Ok(ExecutionResult {
            built: true,
            crashed: crash.is_some(),
            crash,
            coverage,
            duration_s: elapsed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drv() -> FuzzDriver {
        FuzzDriver::new("int LLVMFuzzerTestOneInput(){return 0;}", 1)
    }

    #[test]
    fn build_then_fuzz() {
        let dir = tempfile::tempdir().unwrap();
        let ex = ExternalBuild {
            build_cmd: "test -f \"$FUZZ_DRIVER\"".into(),
            fuzz_cmd: "echo 0.25 > cov.txt; echo '==1==ERROR: AddressSanitizer: SEGV on x' >&2; echo '    #0 0x1 in f /a.c:1:1' >&2".into(),
            coverage_file: "cov.txt".into(),
            grace_s: 5,
            driver_file: default_driver_name(),
        };
        let r = ex.execute(&drv(), 0.0, dir.path()).unwrap();
        assert!(r.crashed);
        assert_eq!(r.coverage, 0.25);
        assert_eq!(r.crash.unwrap().stacktrace[0].function, "f");
    }

    #[test]
    fn build_failure_and_timeout() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = ExternalBuild {
            build_cmd: "echo broken >&2; exit 1".into(),
            fuzz_cmd: "sleep 5".into(),
            coverage_file: "cov.txt".into(),
            grace_s: 0,
            driver_file: default_driver_name(),
        };
        assert!(matches!(
            ex.execute(&drv(), 0.0, dir.path()),
            Err(ExecutorError::BuildFailure(m)) if m.contains("broken")
        ));
        ex.build_cmd = "true".into();
        assert!(matches!(
            ex.execute(&drv(), 0.2, dir.path()),
            Err(ExecutorError::ExecutorTimeout(_))
        ));
    }
}
