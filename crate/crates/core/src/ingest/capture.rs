//! Live capture from a Linux interface through an `AF_PACKET` raw socket.

use std::ffi::CString;
use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::packet::LinkType;
use crate::flow::Timestamp;

const ETH_P_ALL: u16 = 0x0003;
const ARPHRD_ETHER: u32 = 1;
const ARPHRD_LOOPBACK: u32 = 772;
const PACKET_OUTGOING: u8 = 4;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("no such interface: {0}")]
    NoSuchInterface(String),
    #[error("permission denied opening capture on {0} (needs CAP_NET_RAW)")]
    PermissionDenied(String),
    #[error("capture i/o error: {0}")]
    Io(#[from] io::Error),
}

pub struct LiveCapture {
    fd: OwnedFd,
    iface: String,
    link: LinkType,
    skip_outgoing: bool,
}

fn arphrd(iface: &str) -> Option<u32> {
    std::fs::read_to_string(format!("/sys/class/net/{iface}/type"))
        .ok()?
        .trim()
        .parse()
        .ok()
}

impl LiveCapture {
    /// Opens a promiscuous-free capture on `iface` with the given read timeout.
    pub fn open(iface: &str, read_timeout: Duration) -> Result<Self, CaptureError> {
        let cname = CString::new(iface).map_err(|_| CaptureError::NoSuchInterface(iface.into()))?;
        // SAFETY: cname is a valid NUL-terminated string.
        let ifindex = unsafe { libc::if_nametoindex(cname.as_ptr()) };
        if ifindex == 0 {
            return Err(CaptureError::NoSuchInterface(iface.into()));
        }
        let hw = arphrd(iface).unwrap_or(ARPHRD_ETHER);
        let link = match hw {
            ARPHRD_ETHER | ARPHRD_LOOPBACK => LinkType::Ethernet,
            _ => LinkType::RawIp,
        };

        // SAFETY: plain socket(2) call; the result is checked below.
        let raw = unsafe {
            libc::socket(libc::AF_PACKET, libc::SOCK_RAW, (ETH_P_ALL.to_be()) as libc::c_int)
        };
        if raw < 0 {
            let err = io::Error::last_os_error();
            return Err(match err.raw_os_error() {
                Some(libc::EPERM) | Some(libc::EACCES) => CaptureError::PermissionDenied(iface.into()),
                _ => CaptureError::Io(err),
            });
        }
        // SAFETY: raw is a freshly created descriptor we own.
        let fd = unsafe { OwnedFd::from_raw_fd(raw) };

        // SAFETY: sockaddr_ll is plain old data; zeroed is a valid value.
        let mut sll: libc::sockaddr_ll = unsafe { std::mem::zeroed() };
        sll.sll_family = libc::AF_PACKET as u16;
        sll.sll_protocol = ETH_P_ALL.to_be();
        sll.sll_ifindex = ifindex as i32;
        // SAFETY: sll outlives the call and the length matches its type.
        let rc = unsafe {
            libc::bind(
                fd.as_raw_fd(),
                &sll as *const libc::sockaddr_ll as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_ll>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(io::Error::last_os_error().into());
        }

        let tv = libc::timeval {
            tv_sec: read_timeout.as_secs() as libc::time_t,
            tv_usec: read_timeout.subsec_micros() as libc::suseconds_t,
        };
        // SAFETY: tv is a valid timeval for SO_RCVTIMEO.
        let rc = unsafe {
            libc::setsockopt(
                fd.as_raw_fd(),
                libc::SOL_SOCKET,
                libc::SO_RCVTIMEO,
                &tv as *const libc::timeval as *const libc::c_void,
                std::mem::size_of::<libc::timeval>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(io::Error::last_os_error().into());
        }

        Ok(LiveCapture {
            fd,
            iface: iface.to_string(),
            link,
            // loopback delivers every packet twice: once outgoing, once incoming
            skip_outgoing: hw == ARPHRD_LOOPBACK,
        })
    }

    pub fn link_type(&self) -> LinkType {
        self.link
    }

    pub fn interface(&self) -> &str {
        &self.iface
    }

    /// Reads one frame into `buf`. `Ok(None)` means the read timed out.
    pub fn next_frame(&mut self, buf: &mut [u8]) -> io::Result<Option<(usize, Timestamp)>> {
        loop {
            // SAFETY: zeroed sockaddr_ll is valid.
            let mut from: libc::sockaddr_ll = unsafe { std::mem::zeroed() };
            let mut len = std::mem::size_of::<libc::sockaddr_ll>() as libc::socklen_t;
            // SAFETY: buf and from are valid for writes of the given sizes.
            let n = unsafe {
                libc::recvfrom(
                    self.fd.as_raw_fd(),
                    buf.as_mut_ptr() as *mut libc::c_void,
                    buf.len(),
                    libc::MSG_TRUNC,
                    &mut from as *mut libc::sockaddr_ll as *mut libc::sockaddr,
                    &mut len,
                )
            };
            if n < 0 {
                let err = io::Error::last_os_error();
                return match err.kind() {
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Ok(None),
                    io::ErrorKind::Interrupted => continue,
                    _ => Err(err),
                };
            }
            if self.skip_outgoing && from.sll_pkttype == PACKET_OUTGOING {
                continue;
            }
            let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
            let n = (n as usize).min(buf.len());
            return Ok(Some((n, Timestamp(now.as_micros() as i64))));
        }
    }
}
