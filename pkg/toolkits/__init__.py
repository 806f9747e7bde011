"""包含所有工具包的命名空间模块。"""
