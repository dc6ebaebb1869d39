#pragma once

#define TERRACE_LAB_VERSION "0.1.0"
