#see LICENSE.txt for license details
# pytest collects the same check* methods that mkSuite(cls,'check') does
import unittest
unittest.TestLoader.testMethodPrefix = 'check'
