use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use tracing::debug;

use super::ExecError;

/// Captured output is truncated to this many bytes per stream.
pub const OUTPUT_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcOutput {
    /// `None` when the process died from a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SpawnRequest<'a> {
    pub argv: &'a [String],
    pub cwd: &'a Path,
    pub env: &'a [(String, String)],
    pub timeout: Duration,
    pub grace: Duration,
}

/// Launches subprocesses. Swappable so tests can count or fake spawns.
pub trait Spawner: Send + Sync {
    fn spawn(&self, req: &SpawnRequest<'_>) -> Result<ProcOutput, ExecError>;
}

/// Runs each command in its own process group and kills the whole group on
/// timeout: SIGTERM first, SIGKILL once the grace period is over.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemSpawner;

fn read_capped(mut r: impl Read) -> String {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = OUTPUT_CAP.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    String::from_utf8_lossy(&kept).into_owned()
}

fn signal_group(pgid: i32, sig: i32) {
    // SAFETY: killpg has no memory-safety preconditions; the group id is the
    // pid of a child we spawned with its own process group.
    unsafe {
        libc::killpg(pgid, sig);
    }
}

impl Spawner for SystemSpawner {
    fn spawn(&self, req: &SpawnRequest<'_>) -> Result<ProcOutput, ExecError> {
        use std::os::unix::process::CommandExt;

        let Some((prog, args)) = req.argv.split_first() else {
            return Err(ExecError::Toolchain("empty command".into()));
        };
        let mut cmd = Command::new(prog);
        cmd.args(args)
            .current_dir(req.cwd)
            .env_clear()
            .envs(req.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                ExecError::Toolchain(format!("cannot launch {prog:?}: {e}"))
            }
            _ => ExecError::Io(e.to_string()),
        })?;
        let pgid = child.id() as i32;
        let out = child.stdout.take().map(|s| std::thread::spawn(move || read_capped(s)));
        let err = child.stderr.take().map(|s| std::thread::spawn(move || read_capped(s)));

        let mut timed_out = false;
        let status = loop {
            if let Some(st) = child.try_wait().map_err(|e| ExecError::Io(e.to_string()))? {
                break st;
            }
            if started.elapsed() >= req.timeout {
                timed_out = true;
                debug!(pgid, "timeout; terminating process group");
                signal_group(pgid, libc::SIGTERM);
                let deadline = Instant::now() + req.grace;
                loop {
                    if child.try_wait().map_err(|e| ExecError::Io(e.to_string()))?.is_some() {
                        break;
                    }
                    if Instant::now() >= deadline {
                        signal_group(pgid, libc::SIGKILL);
                        break;
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                break child.wait().map_err(|e| ExecError::Io(e.to_string()))?;
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        // Reap stragglers that would otherwise hold the pipes open.
        signal_group(pgid, libc::SIGKILL);
        let elapsed = started.elapsed();
        let stdout = out.map(|h| h.join().unwrap_or_default()).unwrap_or_default();
        let stderr = err.map(|h| h.join().unwrap_or_default()).unwrap_or_default();
        Ok(ProcOutput {
            exit_code: if timed_out { None } else { status.code() },
            stdout,
            stderr,
            timed_out,
            elapsed,
        })
    }
}

/// Wraps a spawner and counts launches.
#[derive(Clone)]
pub struct CountingSpawner {
    inner: Arc<dyn Spawner>,
    count: Arc<AtomicUsize>,
}

impl CountingSpawner {
    pub fn new(inner: Arc<dyn Spawner>) -> Self {
        CountingSpawner {
            inner,
            count: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }
}

impl Spawner for CountingSpawner {
    fn spawn(&self, req: &SpawnRequest<'_>) -> Result<ProcOutput, ExecError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.spawn(req)
    }
}
