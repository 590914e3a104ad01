#pragma once

namespace gianet::parallel {

/// True when GIA_DETERMINISTIC=1 is set in the environment.
bool deterministic_env();

/// Sets the worker count for data-parallel kernels. Forced to 1 when
/// GIA_DETERMINISTIC=1. Zero keeps the runtime default.
void set_workers(int workers);
int workers();

}  // namespace gianet::parallel
