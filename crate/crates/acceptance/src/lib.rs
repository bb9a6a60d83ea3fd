//! Holds the `acceptance` test target, which runs after the library's own
//! suites in a workspace test run.
