//! Shared test fixtures.

pub const PRINTER_METHOD: &str = include_str!("../tests/fixtures/printer/Printer.java");
