#pragma once

#define READMIT_VERSION "0.1.0"
