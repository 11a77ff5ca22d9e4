//! Minimal external twin for exercising the subprocess protocol.
//!
//! Each observation is the previous one plus the action index, starting
//! from `x0[0]` in every coordinate. Misbehaviour modes start after `K`
//! successful steps over the process lifetime:
//!
//! - `normal`
//! - `garbage`: answers steps with a line that is not JSON
//! - `trailing`: valid observation followed by junk on the same line
//! - `error`: answers steps with `{"error":...}`
//! - `bad-length`: one value too many
//! - `crash-after=K`: exits without replying
//! - `hang-after=K`: never replies

use std::io::{self, BufRead, Write};
use std::str::FromStr;

use clap::Parser;
use twinfalsify::twin::protocol::Message;

#[derive(Clone, Copy, Debug)]
enum Mode {
    Normal,
    Garbage,
    Trailing,
    Error,
    BadLength,
    CrashAfter(usize),
    HangAfter(usize),
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let after = |v: &str| v.parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
        Ok(match s.split_once('=') {
            None => match s {
                "normal" => Mode::Normal,
                "garbage" => Mode::Garbage,
                "trailing" => Mode::Trailing,
                "error" => Mode::Error,
                "bad-length" => Mode::BadLength,
                _ => return Err(format!("unknown mode `{s}`")),
            },
            Some(("crash-after", k)) => Mode::CrashAfter(after(k)?),
            Some(("hang-after", k)) => Mode::HangAfter(after(k)?),
            Some(_) => return Err(format!("unknown mode `{s}`")),
        })
    }
}

#[derive(Parser)]
#[command(about = "Echo twin speaking the newline-delimited JSON protocol")]
struct Args {
    #[arg(long, default_value = "normal")]
    mode: Mode,
    /// Length of each observation vector.
    #[arg(long, default_value_t = 1)]
    dim: usize,
}

fn main() {
    let args = Args::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut state: Option<Vec<f64>> = None;
    let mut steps = 0usize;

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let reply = match Message::decode(&line) {
            Err(e) => Message::Error { message: e.to_string() }.encode(),
            Ok(Message::Init { x0 }) => {
                state = Some(vec![x0.first().copied().unwrap_or(0.0); args.dim]);
                Message::Ok.encode()
            }
            Ok(Message::Reset) => {
                state = None;
                Message::Ok.encode()
            }
            Ok(Message::Step { a, .. }) => {
                steps += 1;
                match (args.mode, state.as_mut()) {
                    (Mode::CrashAfter(k), _) if steps > k => std::process::exit(1),
                    (Mode::HangAfter(k), _) if steps > k => loop {
                        std::thread::park();
                    },
                    (_, None) => Message::Error { message: "step before init".into() }.encode(),
                    (Mode::Garbage, _) => "this is not json".to_string(),
                    (Mode::Error, _) => Message::Error { message: "echo twin refuses to step".into() }.encode(),
                    (mode, Some(x)) => {
                        for v in x.iter_mut() {
                            *v += a as f64;
                        }
                        let mut obs = x.clone();
                        if matches!(mode, Mode::BadLength) {
                            obs.push(0.0);
                        }
                        let frame = Message::Observation { x: obs }.encode();
                        if matches!(mode, Mode::Trailing) {
                            frame + " junk"
                        } else {
                            frame
                        }
                    }
                }
            }
            Ok(other) => Message::Error { message: format!("not a command: {}", other.encode()) }.encode(),
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}
