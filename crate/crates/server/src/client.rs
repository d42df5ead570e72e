//! Minimal async client for tests, bots and tooling.

use std::io;

use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpStream, ToSocketAddrs};

use crate::protocol::{decode, encode, ClientMessage, ProtocolError, ServerMessage};

pub struct Client {
    reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
}

impl Client {
    pub async fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (rd, wr) = stream.into_split();
        Ok(Self {
            reader: BufReader::new(rd),
            writer: wr,
        })
    }

    /// Sends one raw line; a newline is appended.
    pub async fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(format!("{line}\n").as_bytes()).await
    }

    pub async fn send(&mut self, msg: &ClientMessage) -> io::Result<()> {
        self.send_line(&encode(msg)).await
    }

    /// Next raw line without its newline; `None` once the server closes.
    pub async fn recv_line(&mut self) -> io::Result<Option<String>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line).await? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
    }

    pub async fn recv(&mut self) -> io::Result<Option<ServerMessage>> {
        match self.recv_line().await? {
            None => Ok(None),
            Some(line) => decode(&line)
                .map(Some)
                .map_err(|e: ProtocolError| io::Error::new(io::ErrorKind::InvalidData, e)),
        }
    }

    pub async fn close(mut self) -> io::Result<()> {
        self.writer.shutdown().await
    }
}
