//! Stream-socket transport carrying the same frames as the emulated link.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::{read_frame, write_frame, Frame, ProtocolError};

/// Single writer for one connection.
pub struct FrameWriter<W: Write> {
    inner: BufWriter<W>,
    bytes_sent: u64,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner: BufWriter::new(inner), bytes_sent: 0 }
    }

    /// Write and flush one frame.
    pub fn send(&mut self, frame: &Frame) -> Result<(), ProtocolError> {
        write_frame(&mut self.inner, frame)?;
        self.inner.flush()?;
        self.bytes_sent += frame.wire_len() as u64;
        Ok(())
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }
}

pub struct FrameReader<R: Read> {
    inner: BufReader<R>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner: BufReader::new(inner) }
    }

    pub fn recv(&mut self) -> Result<Option<Frame>, ProtocolError> {
        read_frame(&mut self.inner)
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<Frame, ProtocolError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.recv().transpose()
    }
}

/// Open a frame connection with Nagle's algorithm disabled.
pub fn connect(addr: impl ToSocketAddrs) -> Result<FrameWriter<TcpStream>, ProtocolError> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    Ok(FrameWriter::new(stream))
}
