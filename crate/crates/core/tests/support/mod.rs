#![allow(dead_code)]

pub mod expr;
