//! One prover process per query, fed over standard input.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

/// What came back from a prover run.
#[derive(Debug)]
pub(crate) enum RawReply {
    Output(String),
    /// The process outlived its wall-clock budget and was killed.
    Killed,
}

/// Runs `command` with `script` on stdin and collects stdout.
pub(crate) fn run_prover(
    command: &[String],
    script: &str,
    wall_clock: Duration,
) -> Result<RawReply, String> {
    let (prog, args) = command
        .split_first()
        .ok_or_else(|| "empty prover command".to_string())?;
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("cannot start prover `{prog}`: {e}"))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = String::new();
        let r = stdout.read_to_string(&mut buf).map(|_| buf);
        let _ = tx.send(r);
    });
    if let Err(e) = stdin.write_all(script.as_bytes()) {
        let _ = child.kill();
        let _ = child.wait();
        return Err(format!("writing to prover: {e}"));
    }
    drop(stdin);

    match rx.recv_timeout(wall_clock) {
        Ok(Ok(out)) => {
            let _ = child.wait();
            Ok(RawReply::Output(out))
        }
        Ok(Err(e)) => {
            let _ = child.kill();
            let _ = child.wait();
            Err(format!("reading prover output: {e}"))
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            Ok(RawReply::Killed)
        }
    }
}

/// Counting semaphore bounding concurrent prover processes.
pub(crate) struct Pool {
    free: Mutex<usize>,
    cv: Condvar,
}

pub(crate) struct Permit<'a>(&'a Pool);

impl Pool {
    pub(crate) fn new(size: usize) -> Self {
        Pool {
            free: Mutex::new(size.max(1)),
            cv: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("pool lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("pool lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("pool lock") += 1;
        self.0.cv.notify_one();
    }
}
