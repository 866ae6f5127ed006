# Test suite for hetrrr
