//! Logic locking and key recovery for combinational netlists.

pub mod attack;
pub mod encode;
pub mod key;
pub mod locking;
pub mod netlist;
pub mod oracle;
pub mod solve;
