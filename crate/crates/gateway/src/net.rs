//! Stream-socket intake: each connection carries length-prefixed frames.

use std::io;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use gaia_core::replay::FrameReader;

use crate::gateway::Gateway;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

/// Feeds every frame on `stream` to the gateway until the peer closes.
/// Returns the number of frames read.
pub fn read_connection(gateway: &Gateway, stream: TcpStream, clock: &Clock) -> io::Result<usize> {
    let mut n = 0;
    for frame in FrameReader::new(io::BufReader::new(stream)) {
        let frame = frame?;
        gateway.accept_frame(&frame, clock());
        n += 1;
    }
    Ok(n)
}

/// Accepts connections forever, one reader thread per connection.
pub fn spawn_listener(
    listener: TcpListener,
    gateway: Arc<Gateway>,
    clock: Clock,
) -> JoinHandle<()> {
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let gateway = Arc::clone(&gateway);
            let clock = Arc::clone(&clock);
            thread::spawn(move || {
                let _ = read_connection(&gateway, stream, &clock);
            });
        }
    })
}
