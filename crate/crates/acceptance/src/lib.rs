//! Holds the `acceptance` test target, which runs after the library and CLI
//! suites so that a failing criterion does not hide their results.
